//! Synthetic covariates and the root-selection simulation experiments.
//!
//! Each replicate draws four covariates (uniform, binary nominal, Gaussian
//! curves, Erdős–Rényi graphs) and a normal response, then runs the root
//! variable selection. Replicate `r` uses substream `(REPLICATE, r)`, shared
//! across every `μ` of a power curve so that the curve is computed on common
//! random numbers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Adjacency, Covariate, GraphKind, NodeView, Response};
use crate::distances::{covariate_distances, response_distances};
use crate::energy::{select_variable, SelectionOutcome};
use crate::par;
use crate::rng::{tag, Streams};

/// z-quantile of the two-sided 95% normal interval.
const Z_95: f64 = 1.96;

pub const COVARIATE_NAMES: [&str; 4] = ["x1", "x2", "x3", "x4"];
pub const FUNCTIONAL_INDEX: usize = 2;
pub const GRAPH_INDEX: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("grid needs at least 2 points, got {0}")]
    Grid(usize),
    #[error("need at least one vertex")]
    Vertices,
    #[error("need at least {needed} observations, got {found}")]
    TooFew { needed: usize, found: usize },
    #[error("need at least one replication")]
    Replications,
    #[error("mu = {0} outside [0, 1]")]
    Mu(f64),
    #[error("component {component} has zero availability but selection frequency {frequency}")]
    ZeroAvailability { component: usize, frequency: f64 },
    #[error("input lengths differ: {0} frequencies, {1} availabilities, {2} group labels")]
    LengthMismatch(usize, usize, usize),
    #[error("no component was ever selected")]
    NoSelections,
    #[error("{0}")]
    Selection(String),
}

/// A generator parameter shared by all observations or differing between
/// the first `⌊n/2⌋` observations and the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupParam {
    Shared { value: f64 },
    Split { first_half: f64, second_half: f64 },
}

impl GroupParam {
    pub fn value(&self, i: usize, n: usize) -> f64 {
        match *self {
            GroupParam::Shared { value } => value,
            GroupParam::Split { first_half, second_half } => {
                if i < n / 2 {
                    first_half
                } else {
                    second_half
                }
            }
        }
    }

    fn values(&self) -> [f64; 2] {
        match *self {
            GroupParam::Shared { value } => [value, value],
            GroupParam::Split { first_half, second_half } => [first_half, second_half],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub grid_size: usize,
    pub n_vertices: usize,
    pub curve_mean: GroupParam,
    pub edge_prob: GroupParam,
}

/// Equally spaced grid on `[0, 1]`.
pub fn unit_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| if i + 1 == points { 1.0 } else { i as f64 / (points - 1) as f64 })
        .collect()
}

pub fn erdos_renyi<R: Rng + ?Sized>(n_vertices: usize, p: f64, rng: &mut R) -> Adjacency {
    let mut adj = Adjacency::empty(n_vertices);
    for u in 0..n_vertices {
        for v in (u + 1)..n_vertices {
            if rng.random::<f64>() < p {
                adj.set_edge(u, v, 1.0);
            }
        }
    }
    adj
}

/// `x1 ~ U(0,1)`, `x2` uniform binary, `x3` i.i.d. `N(mean, 1)` on every
/// grid point, `x4 ~ G(V, p)`.
pub fn gen_covariates<R: Rng + ?Sized>(
    n: usize,
    spec: &GeneratorSpec,
    rng: &mut R,
) -> Result<Vec<Covariate>, SimError> {
    if n == 0 {
        return Err(SimError::TooFew { needed: 1, found: 0 });
    }
    if spec.grid_size < 2 {
        return Err(SimError::Grid(spec.grid_size));
    }
    if spec.n_vertices == 0 {
        return Err(SimError::Vertices);
    }
    if let Some(&p) = spec.edge_prob.values().iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(SimError::Probability(p));
    }

    let x1: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let x2: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let curves: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mean = spec.curve_mean.value(i, n);
            (0..spec.grid_size).map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                mean + z
            }).collect()
        })
        .collect();
    let graphs: Vec<Adjacency> =
        (0..n).map(|i| erdos_renyi(spec.n_vertices, spec.edge_prob.value(i, n), rng)).collect();

    Ok(vec![
        Covariate::numeric(COVARIATE_NAMES[0], x1),
        Covariate::nominal(COVARIATE_NAMES[1], vec!["0".into(), "1".into()], x2),
        Covariate::functional(COVARIATE_NAMES[2], unit_grid(spec.grid_size), curves),
        Covariate::graph(COVARIATE_NAMES[3], GraphKind::Binary, graphs),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub grid_size: usize,
    pub n_vertices: usize,
    pub edge_prob: f64,
    pub alt_edge_prob: f64,
    pub alt_curve_mean: f64,
    pub n_permutations: usize,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            n: 100,
            grid_size: 20,
            n_vertices: 30,
            edge_prob: 0.2,
            alt_edge_prob: 0.8,
            alt_curve_mean: 0.5,
            n_permutations: 199,
            alpha: 0.05,
            replications: 1000,
            seed,
        }
    }

    pub fn paper(seed: u64) -> Self {
        Self { grid_size: 100, n_vertices: 100, n_permutations: 999, replications: 10_000, ..Self::desk(seed) }
    }

    pub fn at_scale(scale: Scale, seed: u64) -> Self {
        match scale {
            Scale::Desk => Self::desk(seed),
            Scale::Paper => Self::paper(seed),
        }
    }

    fn null_spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            grid_size: self.grid_size,
            n_vertices: self.n_vertices,
            curve_mean: GroupParam::Shared { value: 0.0 },
            edge_prob: GroupParam::Shared { value: self.edge_prob },
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if self.replications == 0 {
            return Err(SimError::Replications);
        }
        if self.n < 2 {
            return Err(SimError::TooFew { needed: 2, found: self.n });
        }
        Ok(())
    }
}

/// `p̂ ± 1.96·√(p̂(1−p̂)/R)`, clamped to `[0, 1]`.
pub fn binomial_ci(p_hat: f64, trials: usize) -> (f64, f64) {
    let half = Z_95 * libm::sqrt(p_hat * (1.0 - p_hat) / trials as f64);
    ((p_hat - half).max(0.0), (p_hat + half).min(1.0))
}

/// A binomial proportion with its normal-approximation interval. With zero
/// trials every field is NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub label: String,
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn new(label: impl Into<String>, successes: usize, trials: usize) -> Self {
        let (estimate, lo, hi) = if trials == 0 {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let p = successes as f64 / trials as f64;
            let (lo, hi) = binomial_ci(p, trials);
            (p, lo, hi)
        };
        Self { label: label.into(), successes, trials, estimate, lo, hi }
    }
}

/// Root selection summary of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub min_adjusted_p: f64,
    /// Covariate with the smallest raw p-value.
    pub strongest: usize,
}

fn run_replicate(
    config: &SimConfig,
    spec: &GeneratorSpec,
    mu: f64,
    alpha: f64,
    stream: &Streams,
) -> Result<Replicate, SimError> {
    let mut rng = stream.child(tag::DATA, 0).rng();
    let covariates = gen_covariates(config.n, spec, &mut rng)?;
    let n = config.n;
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let shift = if i < n / 2 { 0.0 } else { mu };
            let z: f64 = StandardNormal.sample(&mut rng);
            shift + z
        })
        .collect();
    let view = NodeView::full(n);
    let dy = response_distances(&Response::Numeric { values: y }, &view)
        .map_err(|e| SimError::Selection(format!("{e}")))?;
    let dxs = covariates
        .iter()
        .map(|c| covariate_distances(c, &view))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| SimError::Selection(format!("{e}")))?;
    let outcome = select_variable(&dxs, &dy, alpha, config.n_permutations, stream)
        .map_err(|e| SimError::Selection(format!("{e}")))?;
    Ok(replicate_of(&outcome))
}

fn run_replicates(
    config: &SimConfig,
    spec: &GeneratorSpec,
    mu: f64,
    alpha: f64,
) -> Result<Vec<Replicate>, SimError> {
    let root = Streams::new(config.seed);
    par::map_indexed(config.replications, |r| {
        run_replicate(config, spec, mu, alpha, &root.child(tag::REPLICATE, r as u64))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnbiasednessResult {
    pub frequencies: Vec<Estimate>,
    pub replications: usize,
    pub seed: u64,
}

/// Under a response independent of all four covariates, the forced root
/// split picks each covariate with probability 1/4 when selection is
/// unbiased.
pub fn scenario_unbiasedness(config: &SimConfig) -> Result<UnbiasednessResult, SimError> {
    config.check()?;
    let reps = run_replicates(config, &config.null_spec(), 0.0, 1.0)?;
    let mut counts = [0usize; 4];
    for r in &reps {
        counts[r.strongest] += 1;
    }
    let frequencies = COVARIATE_NAMES
        .iter()
        .zip(counts)
        .map(|(name, c)| Estimate::new(*name, c, config.replications))
        .collect();
    Ok(UnbiasednessResult { frequencies, replications: config.replications, seed: config.seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Association {
    Functional,
    Graph,
}

impl Association {
    pub fn covariate(self) -> usize {
        match self {
            Association::Functional => FUNCTIONAL_INDEX,
            Association::Graph => GRAPH_INDEX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub mu: f64,
    /// Fraction of replicates whose root splits.
    pub power: Estimate,
    /// Among splitting replicates, fraction splitting on the associated
    /// covariate.
    pub conditional: Estimate,
    pub replicates: Vec<Replicate>,
}

impl PowerPoint {
    fn from_replicates(mu: f64, alpha: f64, associated: usize, replicates: Vec<Replicate>) -> Self {
        let (power, conditional) = tally(&replicates, alpha, associated);
        let label = format!("mu={mu}");
        Self {
            mu,
            power: Estimate::new(label.clone(), power.0, power.1),
            conditional: Estimate::new(label, conditional.0, conditional.1),
            replicates,
        }
    }

    /// Power and conditional estimates re-thresholded at another level on
    /// the same replicates.
    pub fn at_alpha(&self, alpha: f64, associated: usize) -> (Estimate, Estimate) {
        let (power, conditional) = tally(&self.replicates, alpha, associated);
        let label = format!("mu={}", self.mu);
        (Estimate::new(label.clone(), power.0, power.1), Estimate::new(label, conditional.0, conditional.1))
    }
}

fn tally(reps: &[Replicate], alpha: f64, associated: usize) -> ((usize, usize), (usize, usize)) {
    let splits: Vec<&Replicate> = reps.iter().filter(|r| r.min_adjusted_p < alpha).collect();
    let correct = splits.iter().filter(|r| r.strongest == associated).count();
    ((splits.len(), reps.len()), (correct, splits.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub association: Association,
    pub points: Vec<PowerPoint>,
    pub replications: usize,
    pub seed: u64,
}

/// Half of the observations get response mean `μ` and the alternative
/// parameter of the associated covariate (curve mean or edge probability);
/// the other half keep the null parameters.
pub fn scenario_power(
    association: Association,
    mu_grid: &[f64],
    config: &SimConfig,
) -> Result<PowerResult, SimError> {
    config.check()?;
    if let Some(&mu) = mu_grid.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(SimError::Mu(mu));
    }
    let mut spec = config.null_spec();
    match association {
        Association::Functional => {
            spec.curve_mean = GroupParam::Split { first_half: 0.0, second_half: config.alt_curve_mean }
        }
        Association::Graph => {
            spec.edge_prob =
                GroupParam::Split { first_half: config.edge_prob, second_half: config.alt_edge_prob }
        }
    }
    let points = mu_grid
        .iter()
        .map(|&mu| {
            run_replicates(config, &spec, mu, config.alpha)
                .map(|reps| PowerPoint::from_replicates(mu, config.alpha, association.covariate(), reps))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PowerResult { association, points, replications: config.replications, seed: config.seed })
}

/// `0, 0.2, …, 1`.
pub fn default_mu_grid() -> Vec<f64> {
    (0..=5).map(|i| i as f64 / 5.0).collect()
}

/// Availability-corrected selection frequencies per covariate.
///
/// `p̃_j` averages `f̂_s / â_s` over the components `s` of covariate `j`
/// (`grouping[s] = j`), and `p̂_j = p̃_j / Σ p̃`. Components never available
/// and never selected contribute zero.
pub fn corrected_frequencies(
    f_hat: &[f64],
    a_hat: &[f64],
    grouping: &[usize],
) -> Result<Vec<f64>, SimError> {
    if f_hat.len() != a_hat.len() || f_hat.len() != grouping.len() {
        return Err(SimError::LengthMismatch(f_hat.len(), a_hat.len(), grouping.len()));
    }
    let groups = grouping.iter().max().map_or(0, |&g| g + 1);
    let mut sums = vec![0.0; groups];
    let mut sizes = vec![0usize; groups];
    for (s, ((&f, &a), &g)) in f_hat.iter().zip(a_hat).zip(grouping).enumerate() {
        sizes[g] += 1;
        if f == 0.0 {
            continue;
        }
        if a <= 0.0 {
            return Err(SimError::ZeroAvailability { component: s, frequency: f });
        }
        sums[g] += f / a;
    }
    let tilde: Vec<f64> =
        sums.iter().zip(&sizes).map(|(&s, &k)| if k == 0 { 0.0 } else { s / k as f64 }).collect();
    let total: f64 = tilde.iter().sum();
    if total <= 0.0 {
        return Err(SimError::NoSelections);
    }
    Ok(tilde.iter().map(|t| t / total).collect())
}

/// What the experiments keep of a root selection.
pub fn replicate_of(outcome: &SelectionOutcome) -> Replicate {
    Replicate { min_adjusted_p: outcome.min_adjusted_p(), strongest: outcome.strongest() }
}
