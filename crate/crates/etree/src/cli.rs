//! `etree fit | predict | simulate`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::builder::TypedValueParser as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use etree_core::expansion::bspline::MIN_BASIS;
use etree_core::simulate::{self, Association, Scale, SimConfig, SimError};
use etree_core::tree::{self, FitConfig, FitError, SplitMethod};
use etree_core::Prediction;

use crate::{manifest, model, report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "etree", version, about = "Energy trees for numeric, nominal, functional and graph covariates")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a tree and write the model file.
    Fit(FitArgs),
    /// Predict every row of a manifest with a saved model.
    Predict(PredictArgs),
    /// Run a simulation experiment.
    Simulate(SimulateArgs),
}

/// A size for every covariate (`10`) or for one (`name=10`).
#[derive(Debug, Clone, PartialEq)]
pub enum SizeSpec {
    All(usize),
    Named(String, usize),
}

impl FromStr for SizeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("`{v}` is not a non-negative integer"));
        match s.split_once('=') {
            Some((name, v)) if !name.trim().is_empty() => Ok(SizeSpec::Named(name.trim().into(), parse(v)?)),
            Some(_) => Err(format!("`{s}` has an empty covariate name")),
            None => Ok(SizeSpec::All(parse(s)?)),
        }
    }
}

impl SizeSpec {
    fn size(&self) -> usize {
        match self {
            SizeSpec::All(v) | SizeSpec::Named(_, v) => *v,
        }
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if a > 0.0 && a <= 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 1], got {a}"))
    }
}

fn parse_n_basis(s: &str) -> Result<SizeSpec, String> {
    let spec: SizeSpec = s.parse()?;
    if spec.size() < MIN_BASIS {
        return Err(format!("cubic B-splines need at least {MIN_BASIS} basis functions"));
    }
    Ok(spec)
}

fn parse_shell_bins(s: &str) -> Result<SizeSpec, String> {
    let spec: SizeSpec = s.parse()?;
    if spec.size() == 0 {
        return Err("need at least one bin".into());
    }
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Fve,
    Clustering,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub data: PathBuf,
    /// Nominal level of the adjusted variable-selection tests, in (0, 1].
    #[arg(long, default_value_t = tree::DEFAULT_ALPHA, value_parser = parse_alpha)]
    pub alpha: f64,
    /// Minimum number of observations in a kid node.
    #[arg(long, default_value_t = tree::DEFAULT_MIN_BUCKET, value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
    pub min_bucket: usize,
    /// Permutations per test.
    #[arg(long = "n-perm", default_value_t = tree::DEFAULT_PERMUTATIONS, value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
    pub n_perm: usize,
    /// Split method for functional and graph covariates.
    #[arg(long, value_enum, default_value_t = SplitArg::Fve)]
    pub split: SplitArg,
    /// B-spline basis size: `N` for all functional covariates or `name=N`; repeatable.
    #[arg(long, value_parser = parse_n_basis)]
    pub n_basis: Vec<SizeSpec>,
    /// Shell histogram bins: `N` for all weighted graphs or `name=N`; repeatable.
    #[arg(long, value_parser = parse_shell_bins)]
    pub shell_bins: Vec<SizeSpec>,
    /// Random seed; drawn and printed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Manifest of the rows to predict; the response is optional.
    #[arg(long)]
    pub data: PathBuf,
    /// CSV with one prediction per row, no header.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Unbiasedness,
    PowerFunctional,
    PowerGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Replications (default: 1000 desk, 10000 paper).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
    pub reps: Option<usize>,
    /// Observations per replication.
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..).map(|v| v as usize))]
    pub n: Option<usize>,
    /// `paper` runs G = 100, V = 100, R = 10000 and takes hours.
    #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
    pub scale: ScaleArg,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl fmt::Display) -> Self {
        Self { code, message: message.to_string() }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        pool = pool.num_threads(w as usize);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    let workers = pool.current_num_threads();
    let outcome = pool.install(|| match &cli.command {
        Command::Fit(args) => cmd_fit(args, workers),
        Command::Predict(args) => cmd_predict(args, workers),
        Command::Simulate(args) => cmd_simulate(args, workers),
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> (u64, &'static str) {
    match seed {
        Some(s) => (s, "given"),
        None => (rand::random(), "drawn at random; pass --seed to replay"),
    }
}

/// Per-covariate sizes; a later bare `N` replaces the default.
fn sizes(specs: &[SizeSpec], default: usize) -> (usize, BTreeMap<String, usize>) {
    let mut all = default;
    let mut named = BTreeMap::new();
    for s in specs {
        match s {
            SizeSpec::All(v) => all = *v,
            SizeSpec::Named(name, v) => {
                named.insert(name.clone(), *v);
            }
        }
    }
    (all, named)
}

pub fn fit_config(args: &FitArgs, seed: u64) -> FitConfig {
    let defaults = FitConfig::default();
    let (default_n_basis, n_basis) = sizes(&args.n_basis, defaults.default_n_basis);
    let (default_shell_bins, shell_bins) = sizes(&args.shell_bins, defaults.default_shell_bins);
    FitConfig {
        alpha: args.alpha,
        min_bucket: args.min_bucket,
        n_permutations: args.n_perm,
        split_method: match args.split {
            SplitArg::Fve => SplitMethod::Fve,
            SplitArg::Clustering => SplitMethod::Clustering,
        },
        n_basis,
        default_n_basis,
        shell_bins,
        default_shell_bins,
        seed,
        max_depth: None,
    }
}

fn fit_failure(e: FitError) -> Failure {
    let code = match e {
        FitError::Config(_) | FitError::UnknownCovariate(_) => EXIT_USAGE,
        FitError::Data(_) | FitError::Expansion { .. } => EXIT_DATA,
        _ => EXIT_RUNTIME,
    };
    Failure::new(code, e)
}

fn cmd_fit(args: &FitArgs, workers: usize) -> Result<(), Failure> {
    let (seed, seed_note) = resolve_seed(args.seed);
    let config = fit_config(args, seed);
    eprintln!("etree fit");
    eprintln!("  data           {}", args.data.display());
    eprintln!("  out            {}", args.out.display());
    eprintln!("  alpha          {}", config.alpha);
    eprintln!("  min-bucket     {}", config.min_bucket);
    eprintln!("  n-perm         {}", config.n_permutations);
    eprintln!("  split          {}", args.split.to_possible_value().expect("named").get_name());
    eprintln!("  n-basis        {} {}", config.default_n_basis, named(&config.n_basis));
    eprintln!("  shell-bins     {} {}", config.default_shell_bins, named(&config.shell_bins));
    eprintln!("  seed           {seed} ({seed_note})");
    eprintln!("  workers        {workers}");

    let dataset = manifest::load_dataset(&args.data).map_err(|e| Failure::new(EXIT_DATA, e))?;
    let fitted = tree::fit(&dataset, &config).map_err(fit_failure)?;
    model::save(&fitted, &args.out).map_err(|e| Failure::new(EXIT_RUNTIME, e))?;
    print!("{}", fitted.render_text());
    Ok(())
}

fn named(map: &BTreeMap<String, usize>) -> String {
    if map.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = map.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("({})", parts.join(", "))
}

fn cmd_predict(args: &PredictArgs, workers: usize) -> Result<(), Failure> {
    eprintln!("etree predict");
    eprintln!("  model          {}", args.model.display());
    eprintln!("  data           {}", args.data.display());
    eprintln!("  out            {}", args.out.display());
    eprintln!("  workers        {workers}");

    let fitted = model::load(&args.model).map_err(|e| Failure::new(EXIT_DATA, e))?;
    let rows = manifest::load_observations(&args.data).map_err(|e| Failure::new(EXIT_DATA, e))?;
    let predictions = fitted.predict(&rows.covariates).map_err(|e| Failure::new(EXIT_DATA, e))?;
    write_predictions(&args.out, &predictions).map_err(|e| Failure::new(EXIT_RUNTIME, format!("{}: {e}", args.out.display())))?;
    eprintln!("wrote {} predictions", predictions.len());
    Ok(())
}

fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for p in predictions {
        match p {
            Prediction::Numeric(v) => w.write_record([v.to_string()])?,
            Prediction::Class { label, .. } => w.write_record([label])?,
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, workers: usize) -> Result<(), Failure> {
    let (seed, seed_note) = resolve_seed(args.seed);
    let scale = match args.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    let mut config = SimConfig::at_scale(scale, seed);
    if let Some(r) = args.reps {
        config.replications = r;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    let scenario = args.scenario.to_possible_value().expect("named").get_name().to_string();
    let scale_name = args.scale.to_possible_value().expect("named").get_name().to_string();
    let mu_grid = match args.scenario {
        ScenarioArg::Unbiasedness => Vec::new(),
        _ => simulate::default_mu_grid(),
    };

    eprintln!("etree simulate");
    eprintln!("  scenario       {scenario}");
    eprintln!("  scale          {scale_name}");
    eprintln!("  reps           {}", config.replications);
    eprintln!("  n              {}", config.n);
    eprintln!("  grid points    {}", config.grid_size);
    eprintln!("  vertices       {}", config.n_vertices);
    eprintln!("  edge prob      {} (associated half: {})", config.edge_prob, config.alt_edge_prob);
    eprintln!("  curve mean     0 (associated half: {})", config.alt_curve_mean);
    eprintln!("  n-perm         {}", config.n_permutations);
    match args.scenario {
        ScenarioArg::Unbiasedness => eprintln!("  alpha          1 (forced root split)"),
        _ => {
            eprintln!("  alpha          {}", config.alpha);
            eprintln!("  mu grid        {mu_grid:?}");
        }
    }
    eprintln!("  seed           {seed} ({seed_note})");
    eprintln!("  workers        {workers}");

    let meta = report::RunMetadata {
        scenario,
        scale: scale_name,
        seed,
        replications: config.replications,
        n: config.n,
        config: config.clone(),
        mu_grid: mu_grid.clone(),
        assumed: vec![
            format!("n = {} per replication", config.n),
            format!("{} permutations per test", config.n_permutations),
        ],
    };
    let sim_failure = |e: SimError| Failure::new(EXIT_RUNTIME, e);
    let write_failure = |e: std::io::Error| Failure::new(EXIT_RUNTIME, format!("{}: {e}", args.out.display()));
    std::fs::create_dir_all(&args.out).map_err(write_failure)?;

    let (table, written) = match args.scenario {
        ScenarioArg::Unbiasedness => {
            let result = simulate::scenario_unbiasedness(&config).map_err(sim_failure)?;
            (report::unbiasedness_table(&result), report::write_unbiasedness(&args.out, &result, &meta))
        }
        ScenarioArg::PowerFunctional | ScenarioArg::PowerGraph => {
            let association = if args.scenario == ScenarioArg::PowerFunctional {
                Association::Functional
            } else {
                Association::Graph
            };
            let result = simulate::scenario_power(association, &mu_grid, &config).map_err(sim_failure)?;
            (report::power_table(&result), report::write_power(&args.out, &result, &meta))
        }
    };
    let written = written.map_err(write_failure)?;
    print!("{table}");
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
