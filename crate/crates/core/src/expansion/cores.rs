//! k-core and s-core shell decomposition by sequential minimum-strength
//! peeling, and shell distributions.

use alloc::vec;
use alloc::vec::Vec;

use super::ExpansionError;
use crate::dataset::Adjacency;

/// Removes vertices in order of current strength (lowest index on ties).
/// A vertex's shell value is the running maximum of the strength at which
/// vertices were removed up to and including itself.
fn peel(adj: &Adjacency) -> Vec<f64> {
    let n = adj.n_vertices();
    let mut strength: Vec<f64> = (0..n).map(|u| adj.row(u).iter().sum()).collect();
    let mut removed = vec![false; n];
    let mut shell = vec![0.0; n];
    let mut level = 0.0f64;
    for _ in 0..n {
        let mut v = usize::MAX;
        for u in 0..n {
            if !removed[u] && (v == usize::MAX || strength[u] < strength[v]) {
                v = u;
            }
        }
        level = level.max(strength[v]);
        shell[v] = level;
        removed[v] = true;
        for (u, &w) in adj.row(v).iter().enumerate() {
            if !removed[u] && w != 0.0 {
                strength[u] -= w;
            }
        }
    }
    shell
}

/// Shell index of every vertex of a binary undirected graph.
pub fn k_core_shell_indices(adj: &Adjacency) -> Result<Vec<usize>, ExpansionError> {
    if let Some(&value) = adj.entries().iter().find(|&&x| x != 0.0 && x != 1.0) {
        return Err(ExpansionError::NonBinary(value));
    }
    // integer-valued strengths: peeling is exact
    Ok(peel(adj).into_iter().map(|s| s as usize).collect())
}

/// s-core shell value of every vertex of a weighted undirected graph.
pub fn s_core_shell_values(adj: &Adjacency) -> Result<Vec<f64>, ExpansionError> {
    if let Some(&value) = adj.entries().iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return Err(ExpansionError::NegativeWeight(value));
    }
    Ok(peel(adj))
}

/// How shell values map to a fixed-length component vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ShellBins {
    /// Integer shells `0..n_vertices`, one entry each.
    Integer { n_vertices: usize },
    /// Histogram over ascending bin edges; out-of-range values go to the
    /// nearest end bin and the last bin is closed.
    Edges(Vec<f64>),
}

pub fn shell_distribution(values: &[f64], bins: &ShellBins) -> Result<Vec<f64>, ExpansionError> {
    if values.is_empty() {
        return Err(ExpansionError::NoVertices);
    }
    match bins {
        ShellBins::Integer { n_vertices } => {
            let mut counts = vec![0.0; *n_vertices];
            for &v in values {
                let k = v as usize;
                if v < 0.0 || v != k as f64 || k >= *n_vertices {
                    return Err(ExpansionError::BadShell(v));
                }
                counts[k] += 1.0;
            }
            Ok(counts)
        }
        ShellBins::Edges(edges) => {
            if edges.len() < 2 {
                return Err(ExpansionError::EmptyBins);
            }
            let n_bins = edges.len() - 1;
            let mut counts = vec![0.0; n_bins];
            for &v in values {
                // first edge strictly above v, minus one
                let above = edges[1..n_bins].iter().take_while(|&&e| e <= v).count();
                counts[above] += 1.0;
            }
            Ok(counts)
        }
    }
}

/// `n_bins` equal-width bins over `[lo, hi]`; a degenerate range gets unit
/// width.
pub fn equal_width_edges(lo: f64, hi: f64, n_bins: usize) -> Vec<f64> {
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 / n_bins as f64 };
    (0..=n_bins)
        .map(|i| if i == n_bins && hi > lo { hi } else { lo + width * i as f64 })
        .collect()
}
