//! Simulation result files: one CSV per table plus a JSON metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use etree_core::simulate::{Estimate, PowerResult, SimConfig, UnbiasednessResult};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub scenario: String,
    pub scale: String,
    pub seed: u64,
    pub replications: usize,
    pub n: usize,
    pub config: SimConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mu_grid: Vec<f64>,
    /// Parameters the experiments leave unstated and that were filled in.
    pub assumed: Vec<String>,
}

fn write_estimates(path: &Path, key: &str, rows: &[(String, &Estimate)]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([key, "successes", "trials", "estimate", "lo", "hi"])?;
    for (k, e) in rows {
        w.write_record([
            k.clone(),
            e.successes.to_string(),
            e.trials.to_string(),
            e.estimate.to_string(),
            e.lo.to_string(),
            e.hi.to_string(),
        ])?;
    }
    w.flush()
}

fn write_metadata(dir: &Path, meta: &RunMetadata) -> std::io::Result<PathBuf> {
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&path, text + "\n")?;
    Ok(path)
}

/// Writes `unbiasedness.csv` and `metadata.json`; returns the paths written.
pub fn write_unbiasedness(
    dir: &Path,
    result: &UnbiasednessResult,
    meta: &RunMetadata,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let table = dir.join("unbiasedness.csv");
    let rows: Vec<(String, &Estimate)> = result.frequencies.iter().map(|e| (e.label.clone(), e)).collect();
    write_estimates(&table, "covariate", &rows)?;
    Ok(vec![table, write_metadata(dir, meta)?])
}

/// Writes `power.csv`, `conditional.csv` and `metadata.json`.
pub fn write_power(dir: &Path, result: &PowerResult, meta: &RunMetadata) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let power = dir.join("power.csv");
    let conditional = dir.join("conditional.csv");
    let rows: Vec<(String, &Estimate)> = result.points.iter().map(|p| (p.mu.to_string(), &p.power)).collect();
    write_estimates(&power, "mu", &rows)?;
    let rows: Vec<(String, &Estimate)> =
        result.points.iter().map(|p| (p.mu.to_string(), &p.conditional)).collect();
    write_estimates(&conditional, "mu", &rows)?;
    Ok(vec![power, conditional, write_metadata(dir, meta)?])
}

fn fmt_estimate(e: &Estimate) -> String {
    if e.trials == 0 {
        "      -  (no splits)".into()
    } else {
        format!("{:.4}  ({:.4}, {:.4})", e.estimate, e.lo, e.hi)
    }
}

pub fn unbiasedness_table(result: &UnbiasednessResult) -> String {
    let mut out = format!("{:<10} {:>8}  95% CI\n", "covariate", "freq");
    for e in &result.frequencies {
        out += &format!("{:<10} {}\n", e.label, fmt_estimate(e));
    }
    out
}

pub fn power_table(result: &PowerResult) -> String {
    let mut out = format!("{:<6} {:<26} {}\n", "mu", "power (95% CI)", "conditional (95% CI)");
    for p in &result.points {
        out += &format!("{:<6} {:<26} {}\n", p.mu, fmt_estimate(&p.power), fmt_estimate(&p.conditional));
    }
    out
}
