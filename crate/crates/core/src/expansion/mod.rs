//! Coefficient expansion of structured covariates into real components.
//!
//! Curves become least-squares cubic B-spline coefficients; binary graphs
//! become k-core shell distributions (one count per shell index); weighted
//! graphs become histograms of s-core shell values over bin edges fixed on
//! the training column. [`Expansion`] carries whatever is needed to expand
//! an unseen observation identically at prediction time.

pub mod bspline;
pub mod cores;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Covariate, CovariateData, GraphKind, NodeView, Observation};
pub use bspline::{BSplineBasis, BSplineFitter};
pub use cores::{k_core_shell_indices, s_core_shell_values, shell_distribution, ShellBins};

pub const DEFAULT_N_BASIS: usize = 10;
pub const DEFAULT_SHELL_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpansionError {
    #[error("cubic B-splines need at least 4 basis functions, got {0}")]
    TooFewBasis(usize),
    #[error("empty spline domain")]
    EmptyDomain,
    #[error("invalid knot vector")]
    BadKnots,
    #[error("B-spline design is rank deficient ({grid_len} grid points, {n_basis} basis functions)")]
    RankDeficient { grid_len: usize, n_basis: usize },
    #[error("curve has {found} values, expected {expected}")]
    CurveLength { expected: usize, found: usize },
    #[error("adjacency entry {0} is not binary")]
    NonBinary(f64),
    #[error("negative or non-finite edge weight {0}")]
    NegativeWeight(f64),
    #[error("graph has {found} vertices, expected {expected}")]
    VertexCount { expected: usize, found: usize },
    #[error("graph without vertices")]
    NoVertices,
    #[error("weighted shell distribution needs bin edges")]
    EmptyBins,
    #[error("shell value {0} outside the integer shell range")]
    BadShell(f64),
    #[error("at least one bin is required")]
    NoBins,
    #[error("{0} covariates have no coefficient expansion")]
    Unsupported(&'static str),
    #[error("observation type does not match the expansion")]
    TypeMismatch,
}

/// Persisted description of a fitted expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expansion {
    BSpline { grid: Vec<f64>, knots: Vec<f64> },
    ShellCounts { n_vertices: usize },
    ShellHistogram { n_vertices: usize, edges: Vec<f64> },
}

impl Expansion {
    pub fn n_components(&self) -> usize {
        match self {
            Expansion::BSpline { knots, .. } => knots.len() - 4,
            Expansion::ShellCounts { n_vertices } => *n_vertices,
            Expansion::ShellHistogram { edges, .. } => edges.len() - 1,
        }
    }

    /// Human-readable label of component `s` (0-based).
    pub fn component_label(&self, s: usize) -> String {
        match self {
            Expansion::BSpline { .. } => alloc::format!("B-spline coefficient {}", s + 1),
            Expansion::ShellCounts { .. } => alloc::format!("shell {s} count"),
            Expansion::ShellHistogram { edges, .. } => {
                alloc::format!("shell bin [{}, {}] count", edges[s], edges[s + 1])
            }
        }
    }

    /// Prepares a reusable expander (the B-spline projector is factored once).
    pub fn expander(&self) -> Result<Expander<'_>, ExpansionError> {
        Ok(match self {
            Expansion::BSpline { grid, knots } => Expander::BSpline(BSplineFitter::with_basis(
                grid,
                BSplineBasis::from_knots(knots.clone())?,
            )?),
            Expansion::ShellCounts { n_vertices } => Expander::Counts(*n_vertices),
            Expansion::ShellHistogram { n_vertices, edges } => Expander::Histogram(*n_vertices, edges),
        })
    }

    pub fn expand(&self, obs: Observation<'_>) -> Result<Vec<f64>, ExpansionError> {
        self.expander()?.expand(obs)
    }
}

pub enum Expander<'a> {
    BSpline(BSplineFitter),
    Counts(usize),
    Histogram(usize, &'a [f64]),
}

impl Expander<'_> {
    pub fn expand(&self, obs: Observation<'_>) -> Result<Vec<f64>, ExpansionError> {
        match (self, obs) {
            (Expander::BSpline(fit), Observation::Functional { values, .. }) => {
                fit.coefficients(values)
            }
            (Expander::Counts(n), Observation::Graph(adj)) => {
                check_vertices(*n, adj.n_vertices())?;
                let shells: Vec<f64> =
                    k_core_shell_indices(adj)?.into_iter().map(|s| s as f64).collect();
                shell_distribution(&shells, &ShellBins::Integer { n_vertices: *n })
            }
            (Expander::Histogram(n, edges), Observation::Graph(adj)) => {
                check_vertices(*n, adj.n_vertices())?;
                shell_distribution(&s_core_shell_values(adj)?, &ShellBins::Edges(edges.to_vec()))
            }
            _ => Err(ExpansionError::TypeMismatch),
        }
    }
}

fn check_vertices(expected: usize, found: usize) -> Result<(), ExpansionError> {
    if expected == found {
        Ok(())
    } else {
        Err(ExpansionError::VertexCount { expected, found })
    }
}

/// `m × s` matrix of components; row `k` expands the `k`-th observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    expansion: Expansion,
}

impl ComponentMatrix {
    pub fn from_rows(rows: &[Vec<f64>], expansion: Expansion) -> Self {
        let cols = expansion.n_components();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            debug_assert_eq!(r.len(), cols);
            values.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, values, expansion }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_components(&self) -> usize {
        self.cols
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.cols..(k + 1) * self.cols]
    }

    pub fn column(&self, s: usize) -> Vec<f64> {
        (0..self.rows).map(|k| self.values[k * self.cols + s]).collect()
    }

    pub fn expansion(&self) -> &Expansion {
        &self.expansion
    }
}

/// B-spline coefficients of every curve on a shared grid.
pub fn bspline_coefficients(
    curves: &[Vec<f64>],
    grid: &[f64],
    n_basis: usize,
) -> Result<ComponentMatrix, ExpansionError> {
    let fit = BSplineFitter::new(grid, n_basis)?;
    let rows = curves.iter().map(|c| fit.coefficients(c)).collect::<Result<Vec<_>, _>>()?;
    let expansion =
        Expansion::BSpline { grid: grid.to_vec(), knots: fit.basis().knots().to_vec() };
    Ok(ComponentMatrix::from_rows(&rows, expansion))
}

/// Expansion of a whole structured column, fixed on all its observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnExpansion {
    pub expansion: Expansion,
    pub rows: Vec<Vec<f64>>,
}

impl ColumnExpansion {
    pub fn fit(covariate: &Covariate, n_basis: usize, shell_bins: usize) -> Result<Self, ExpansionError> {
        match &covariate.data {
            CovariateData::Functional(col) => {
                let m = bspline_coefficients(&col.curves, &col.grid, n_basis)?;
                let rows = (0..m.n_rows()).map(|k| m.row(k).to_vec()).collect();
                Ok(Self { expansion: m.expansion, rows })
            }
            CovariateData::Graph(col) => {
                let n_vertices = col.n_vertices().ok_or(ExpansionError::NoVertices)?;
                match col.kind {
                    GraphKind::Binary => {
                        let expansion = Expansion::ShellCounts { n_vertices };
                        let ex = expansion.expander()?;
                        let rows = (0..col.graphs.len())
                            .map(|i| ex.expand(covariate.observation(i)))
                            .collect::<Result<_, _>>()?;
                        Ok(Self { expansion, rows })
                    }
                    GraphKind::Weighted => {
                        if shell_bins == 0 {
                            return Err(ExpansionError::NoBins);
                        }
                        let shells = col
                            .graphs
                            .iter()
                            .map(s_core_shell_values)
                            .collect::<Result<Vec<_>, _>>()?;
                        let (lo, hi) = shells.iter().flatten().fold(
                            (f64::INFINITY, f64::NEG_INFINITY),
                            |(lo, hi), &v| (lo.min(v), hi.max(v)),
                        );
                        let edges = cores::equal_width_edges(lo, hi, shell_bins);
                        let bins = ShellBins::Edges(edges.clone());
                        let rows = shells
                            .iter()
                            .map(|s| shell_distribution(s, &bins))
                            .collect::<Result<_, _>>()?;
                        Ok(Self { expansion: Expansion::ShellHistogram { n_vertices, edges }, rows })
                    }
                }
            }
            CovariateData::Numeric { .. } => Err(ExpansionError::Unsupported("numeric")),
            CovariateData::Nominal { .. } => Err(ExpansionError::Unsupported("nominal")),
        }
    }

    /// Components of a node's observations.
    pub fn node_matrix(&self, view: &NodeView) -> ComponentMatrix {
        let rows: Vec<Vec<f64>> = view.indices().iter().map(|&i| self.rows[i].clone()).collect();
        ComponentMatrix::from_rows(&rows, self.expansion.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Adjacency;
    use alloc::vec;

    fn grid(g: usize) -> Vec<f64> {
        (0..g).map(|i| i as f64 / (g - 1) as f64).collect()
    }

    #[test]
    fn constant_curve_coefficients() {
        let g = grid(30);
        let m = bspline_coefficients(&[vec![7.0; 30]], &g, 10).unwrap();
        assert_eq!(m.n_components(), 10);
        assert!(m.row(0).iter().all(|c| (c - 7.0).abs() < 1e-10));
    }

    #[test]
    fn linear_curve_is_reproduced() {
        let g = grid(101);
        let m = bspline_coefficients(core::slice::from_ref(&g), &g, 10).unwrap();
        let Expansion::BSpline { knots, .. } = m.expansion() else { panic!() };
        let basis = BSplineBasis::from_knots(knots.clone()).unwrap();
        for &t in &g {
            assert!((basis.reconstruct(m.row(0), t) - t).abs() < 1e-8);
        }
    }

    #[test]
    fn sine_reconstruction_error() {
        let g: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let f: Vec<f64> = g.iter().map(|t| libm::sin(2.0 * core::f64::consts::PI * t)).collect();
        let m = bspline_coefficients(core::slice::from_ref(&f), &g, 10).unwrap();
        let basis = BSplineBasis::uniform(0.0, 1.0, 10).unwrap();
        let mse: f64 = g
            .iter()
            .zip(&f)
            .map(|(t, y)| (basis.reconstruct(m.row(0), *t) - y).powi(2))
            .sum::<f64>()
            / g.len() as f64;
        assert!(mse.sqrt() < 1e-2, "rmse {}", mse.sqrt());
    }

    #[test]
    fn persisted_metadata_reproduces_expansion() {
        let g = grid(25);
        let curves: Vec<Vec<f64>> =
            (0..4).map(|k| g.iter().map(|t| libm::cos(t * k as f64) + t).collect()).collect();
        let cov = Covariate::functional("f", g.clone(), curves);
        let col = ColumnExpansion::fit(&cov, 8, 10).unwrap();
        for i in 0..4 {
            assert_eq!(col.expansion.expand(cov.observation(i)).unwrap(), col.rows[i]);
        }
    }

    #[test]
    fn weighted_graph_column_uses_training_range() {
        let mut a = Adjacency::empty(3);
        a.set_edge(0, 1, 2.0);
        let mut b = Adjacency::empty(3);
        b.set_edge(0, 1, 1.0);
        b.set_edge(1, 2, 4.0);
        let cov = Covariate::graph("g", GraphKind::Weighted, vec![a, b]);
        let col = ColumnExpansion::fit(&cov, 10, 4).unwrap();
        let Expansion::ShellHistogram { edges, .. } = &col.expansion else { panic!() };
        // shells: a = (2, 2, 0), b = (1, 4, 4)
        assert_eq!(edges, &vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(col.rows[0], vec![1.0, 0.0, 2.0, 0.0]);
        assert_eq!(col.rows[1], vec![0.0, 1.0, 0.0, 2.0]);
        for r in &col.rows {
            assert_eq!(r.iter().sum::<f64>(), 3.0);
        }
        assert_eq!(col.expansion.expand(cov.observation(1)).unwrap(), col.rows[1]);
        assert!(col.expansion.expand(Observation::Numeric(1.0)).is_err());
    }

    #[test]
    fn traditional_covariates_have_no_expansion() {
        let cov = Covariate::numeric("x", vec![1.0]);
        assert!(ColumnExpansion::fit(&cov, 10, 10).is_err());
    }
}
