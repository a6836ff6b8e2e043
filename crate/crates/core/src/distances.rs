//! Distance kernels for each covariate type and node-local distance matrices.
//!
//! | type       | distance                                         |
//! |------------|--------------------------------------------------|
//! | numeric    | `|a - b|`                                        |
//! | nominal    | `I(a != b)` (Gower)                              |
//! | functional | L² norm of the difference, trapezoidal quadrature |
//! | graph      | Frobenius norm of the adjacency difference       |

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Adjacency, Covariate, CovariateData, NodeView, Observation, Response};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistanceError {
    #[error("non-finite input")]
    NonFinite,
    #[error("level code {code} out of range for {levels} levels")]
    CodeOutOfRange { code: u32, levels: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("curves need at least 2 grid points")]
    GridTooShort,
    #[error("graphs have {0} and {1} vertices")]
    VertexMismatch(usize, usize),
    #[error("observations of different types")]
    TypeMismatch,
    #[error("empty node")]
    EmptyView,
}

/// Which kernel a column uses; stored with medoid rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Euclidean,
    Gower,
    L2,
    EdgeDifference,
}

pub fn dist_numeric(a: f64, b: f64) -> Result<f64, DistanceError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(DistanceError::NonFinite);
    }
    Ok((a - b).abs())
}

pub fn dist_nominal(a: u32, b: u32, levels: usize) -> Result<f64, DistanceError> {
    for code in [a, b] {
        if code as usize >= levels {
            return Err(DistanceError::CodeOutOfRange { code, levels });
        }
    }
    Ok(gower(a, b))
}

#[inline]
fn gower(a: u32, b: u32) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

pub fn dist_functional(f: &[f64], g: &[f64], grid: &[f64]) -> Result<f64, DistanceError> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(DistanceError::LengthMismatch(f.len().max(g.len()), grid.len()));
    }
    if grid.len() < 2 {
        return Err(DistanceError::GridTooShort);
    }
    Ok(l2_trapezoid(f, g, grid))
}

#[inline]
fn l2_trapezoid(f: &[f64], g: &[f64], grid: &[f64]) -> f64 {
    let mut prev = (f[0] - g[0]) * (f[0] - g[0]);
    let mut acc = 0.0;
    for i in 1..grid.len() {
        let d = f[i] - g[i];
        let cur = d * d;
        acc += 0.5 * (grid[i] - grid[i - 1]) * (prev + cur);
        prev = cur;
    }
    libm::sqrt(acc)
}

pub fn dist_graph(a: &Adjacency, b: &Adjacency) -> Result<f64, DistanceError> {
    if a.n_vertices() != b.n_vertices() {
        return Err(DistanceError::VertexMismatch(a.n_vertices(), b.n_vertices()));
    }
    Ok(edge_difference(a, b))
}

#[inline]
fn edge_difference(a: &Adjacency, b: &Adjacency) -> f64 {
    let sum: f64 = a
        .entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    libm::sqrt(sum)
}

/// Distance between two observations of the same type.
pub fn observation_distance(a: Observation<'_>, b: Observation<'_>) -> Result<f64, DistanceError> {
    match (a, b) {
        (Observation::Numeric(x), Observation::Numeric(y)) => dist_numeric(x, y),
        (Observation::Nominal(x), Observation::Nominal(y)) => Ok(gower(x, y)),
        (
            Observation::Functional { values: f, grid },
            Observation::Functional { values: g, .. },
        ) => dist_functional(f, g, grid),
        (Observation::Graph(x), Observation::Graph(y)) => dist_graph(x, y),
        _ => Err(DistanceError::TypeMismatch),
    }
}

/// Symmetric `m × m` matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Fills the upper triangle from `dist(k, l)` for `k < l` and mirrors it.
    pub fn from_fn<F>(m: usize, mut dist: F) -> Self
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut entries = vec![0.0; m * m];
        for k in 0..m {
            for l in (k + 1)..m {
                let d = dist(k, l);
                entries[k * m + l] = d;
                entries[l * m + k] = d;
            }
        }
        Self { m, entries }
    }

    /// Builds from raw row-major entries. Callers are responsible for the
    /// symmetric / zero-diagonal / non-negative invariants.
    pub fn from_entries(m: usize, entries: Vec<f64>) -> Result<Self, DistanceError> {
        if entries.len() != m * m {
            return Err(DistanceError::LengthMismatch(entries.len(), m * m));
        }
        Ok(Self { m, entries })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[k * self.m + l]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[k * self.m..(k + 1) * self.m]
    }

    /// True when every entry is zero (e.g. a constant column).
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&d| d == 0.0)
    }

    /// Gower distances between the entries of a membership vector.
    pub fn from_indicator(indicator: &[bool]) -> Self {
        Self::from_fn(indicator.len(), |k, l| if indicator[k] == indicator[l] { 0.0 } else { 1.0 })
    }

    /// Euclidean distances between the entries of a real vector.
    pub fn from_reals(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |k, l| (values[k] - values[l]).abs())
    }
}

/// Pairwise distances of a covariate over the node enumeration.
///
/// The column is assumed to have passed dataset validation; only the view
/// is checked here.
pub fn covariate_distances(
    covariate: &Covariate,
    view: &NodeView,
) -> Result<DistanceMatrix, DistanceError> {
    if view.is_empty() {
        return Err(DistanceError::EmptyView);
    }
    let idx = view.indices();
    let m = idx.len();
    Ok(match &covariate.data {
        CovariateData::Numeric { values } => {
            DistanceMatrix::from_fn(m, |k, l| (values[idx[k]] - values[idx[l]]).abs())
        }
        CovariateData::Nominal { codes, .. } => {
            DistanceMatrix::from_fn(m, |k, l| gower(codes[idx[k]], codes[idx[l]]))
        }
        CovariateData::Functional(col) => DistanceMatrix::from_fn(m, |k, l| {
            if idx[k] == idx[l] {
                0.0
            } else {
                l2_trapezoid(&col.curves[idx[k]], &col.curves[idx[l]], &col.grid)
            }
        }),
        CovariateData::Graph(col) => DistanceMatrix::from_fn(m, |k, l| {
            if idx[k] == idx[l] {
                0.0
            } else {
                edge_difference(&col.graphs[idx[k]], &col.graphs[idx[l]])
            }
        }),
    })
}

/// Pairwise response distances: `|Y_k - Y_l|` for regression, Gower for
/// classification.
pub fn response_distances(
    response: &Response,
    view: &NodeView,
) -> Result<DistanceMatrix, DistanceError> {
    if view.is_empty() {
        return Err(DistanceError::EmptyView);
    }
    let idx = view.indices();
    Ok(match response {
        Response::Numeric { values } => {
            DistanceMatrix::from_fn(idx.len(), |k, l| (values[idx[k]] - values[idx[l]]).abs())
        }
        Response::Categorical { codes, .. } => {
            DistanceMatrix::from_fn(idx.len(), |k, l| gower(codes[idx[k]], codes[idx[l]]))
        }
    })
}

pub fn distance_kind(covariate: &Covariate) -> DistanceKind {
    match covariate.data {
        CovariateData::Numeric { .. } => DistanceKind::Euclidean,
        CovariateData::Nominal { .. } => DistanceKind::Gower,
        CovariateData::Functional(_) => DistanceKind::L2,
        CovariateData::Graph(_) => DistanceKind::EdgeDifference,
    }
}
