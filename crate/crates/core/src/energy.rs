//! Distance covariance, permutation tests of independence, Benjamini–Hochberg
//! adjustment and per-node variable selection.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distances::DistanceMatrix;
use crate::par;
use crate::rng::{tag, Streams};

/// Values in `[-FLOOR, 0)` are rounding noise of a non-negative quantity.
pub const NEGATIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("distance matrices have sizes {0} and {1}")]
    SizeMismatch(usize, usize),
    #[error("need at least {needed} observations, got {found}")]
    TooFew { needed: usize, found: usize },
    #[error("need at least one permutation")]
    NoPermutations,
    #[error("p-value {value} at position {index} is outside (0, 1]")]
    PValueRange { index: usize, value: f64 },
    #[error("no covariates to test")]
    NoCovariates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceTest {
    /// `m · V²_m`.
    pub statistic: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub covariate_index: usize,
}

/// Double-centred distance matrix: `a_kl - ā_k· - ā_·l + ā_··`.
#[derive(Debug, Clone)]
pub struct Centered {
    m: usize,
    entries: Vec<f64>,
}

impl Centered {
    pub fn new(d: &DistanceMatrix) -> Self {
        let m = d.size();
        let mf = m as f64;
        let row_means: Vec<f64> = (0..m).map(|k| d.row(k).iter().sum::<f64>() / mf).collect();
        // symmetric input: column means equal row means
        let grand = row_means.iter().sum::<f64>() / mf;
        let mut entries = Vec::with_capacity(m * m);
        for k in 0..m {
            for (l, &a) in d.row(k).iter().enumerate() {
                entries.push(a - row_means[k] - row_means[l] + grand);
            }
        }
        Self { m, entries }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// `Σ_kl self_kl · other_{π(k) π(l)}`, exploiting symmetry of both.
    fn cross_sum(&self, other: &Centered, perm: Option<&[usize]>) -> f64 {
        let m = self.m;
        let mut diag = 0.0;
        let mut off = 0.0;
        match perm {
            None => {
                for k in 0..m {
                    let a = &self.entries[k * m..(k + 1) * m];
                    let b = &other.entries[k * m..(k + 1) * m];
                    diag += a[k] * b[k];
                    off += a[k + 1..].iter().zip(&b[k + 1..]).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            Some(p) => {
                for k in 0..m {
                    let a = &self.entries[k * m..(k + 1) * m];
                    let b = &other.entries[p[k] * m..(p[k] + 1) * m];
                    diag += a[k] * b[p[k]];
                    off += a[k + 1..]
                        .iter()
                        .zip(&p[k + 1..])
                        .map(|(x, &pl)| x * b[pl])
                        .sum::<f64>();
                }
            }
        }
        diag + 2.0 * off
    }
}

fn floor_negative(v: f64) -> f64 {
    if (-NEGATIVE_FLOOR..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// Squared sample distance covariance `V²_m`.
pub fn dcov_squared(dx: &DistanceMatrix, dy: &DistanceMatrix) -> Result<f64, EnergyError> {
    if dx.size() != dy.size() {
        return Err(EnergyError::SizeMismatch(dx.size(), dy.size()));
    }
    if dx.size() == 0 {
        return Err(EnergyError::TooFew { needed: 1, found: 0 });
    }
    let m = dx.size() as f64;
    let (a, b) = (Centered::new(dx), Centered::new(dy));
    Ok(floor_negative(a.cross_sum(&b, None) / (m * m)))
}

/// Permutation test of independence between the covariate behind `ax` and
/// the response behind `by`, both already double-centred.
///
/// Replicates reindex the response by uniform permutations drawn from
/// `streams`; the p-value is `(1 + #{T_b >= T}) / (B + 1)`.
pub fn centered_test(
    ax: &Centered,
    by: &Centered,
    n_permutations: usize,
    streams: &Streams,
) -> Result<(f64, f64), EnergyError> {
    let m = ax.size();
    if by.size() != m {
        return Err(EnergyError::SizeMismatch(m, by.size()));
    }
    if m < 2 {
        return Err(EnergyError::TooFew { needed: 2, found: m });
    }
    if n_permutations == 0 {
        return Err(EnergyError::NoPermutations);
    }
    let mf = m as f64;
    let statistic = |perm: Option<&[usize]>| floor_negative(ax.cross_sum(by, perm) / mf);
    let observed = statistic(None);

    let mut rng = streams.rng();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut exceed = 0usize;
    for _ in 0..n_permutations {
        perm.shuffle(&mut rng);
        if statistic(Some(&perm)) >= observed {
            exceed += 1;
        }
    }
    let p_value = (1 + exceed) as f64 / (n_permutations + 1) as f64;
    Ok((observed, p_value))
}

/// Energy test of independence with statistic `m · V²_m`.
pub fn energy_test(
    dx: &DistanceMatrix,
    dy: &DistanceMatrix,
    n_permutations: usize,
    streams: &Streams,
) -> Result<IndependenceTest, EnergyError> {
    if dx.size() != dy.size() {
        return Err(EnergyError::SizeMismatch(dx.size(), dy.size()));
    }
    let (statistic, p_value) =
        centered_test(&Centered::new(dx), &Centered::new(dy), n_permutations, streams)?;
    Ok(IndependenceTest { statistic, p_value, n_permutations, covariate_index: 0 })
}

/// Benjamini–Hochberg step-up adjusted p-values, in input order.
pub fn bh_adjust(p: &[f64]) -> Result<Vec<f64>, EnergyError> {
    for (index, &value) in p.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            return Err(EnergyError::PValueRange { index, value });
        }
    }
    let j = p.len();
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![0.0; j];
    let mut running = 1.0f64;
    for rank in (0..j).rev() {
        let i = order[rank];
        // J/i >= 1; the max only undoes rounding below p when i == J
        let q = (p[i] * j as f64 / (rank + 1) as f64).max(p[i]);
        running = running.min(q);
        adjusted[i] = running;
    }
    Ok(adjusted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SelectionOutcome {
    Stop { tests: Vec<IndependenceTest>, adjusted_p: Vec<f64> },
    Selected { covariate: usize, tests: Vec<IndependenceTest>, adjusted_p: Vec<f64> },
}

impl SelectionOutcome {
    pub fn tests(&self) -> &[IndependenceTest] {
        match self {
            SelectionOutcome::Stop { tests, .. } | SelectionOutcome::Selected { tests, .. } => tests,
        }
    }

    pub fn adjusted_p(&self) -> &[f64] {
        match self {
            SelectionOutcome::Stop { adjusted_p, .. }
            | SelectionOutcome::Selected { adjusted_p, .. } => adjusted_p,
        }
    }

    pub fn min_adjusted_p(&self) -> f64 {
        self.adjusted_p().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Covariate with the smallest raw p-value, lowest index on ties,
    /// whether or not the node stopped.
    pub fn strongest(&self) -> usize {
        argmin_raw(self.tests())
    }
}

fn argmin_raw(tests: &[IndependenceTest]) -> usize {
    let mut best = 0;
    for (j, t) in tests.iter().enumerate() {
        if t.p_value < tests[best].p_value {
            best = j;
        }
    }
    best
}

/// Runs one energy test per covariate, adjusts the p-values and decides
/// whether the node splits.
///
/// Covariate `j` draws its permutations from `streams.child(SELECT, j)`.
pub fn select_variable(
    covariates: &[DistanceMatrix],
    response: &DistanceMatrix,
    alpha: f64,
    n_permutations: usize,
    streams: &Streams,
) -> Result<SelectionOutcome, EnergyError> {
    if covariates.is_empty() {
        return Err(EnergyError::NoCovariates);
    }
    let by = Centered::new(response);
    let results = par::map_indexed(covariates.len(), |j| {
        let ax = Centered::new(&covariates[j]);
        let (statistic, p_value) =
            centered_test(&ax, &by, n_permutations, &streams.child(tag::SELECT, j as u64))?;
        Ok(IndependenceTest { statistic, p_value, n_permutations, covariate_index: j })
    });
    let tests = results.into_iter().collect::<Result<Vec<_>, EnergyError>>()?;
    let raw: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
    let adjusted_p = bh_adjust(&raw)?;
    let min_adj = adjusted_p.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if min_adj < alpha {
        SelectionOutcome::Selected { covariate: argmin_raw(&tests), tests, adjusted_p }
    } else {
        SelectionOutcome::Stop { tests, adjusted_p }
    })
}
