//! Energy trees: recursive partitioning for regression and classification
//! with numeric, nominal, functional and graph-valued covariates.
//!
//! Variable selection at each node runs a distance-covariance permutation
//! test between the response and every covariate, combines the resulting
//! p-values with the Benjamini–Hochberg step-up adjustment and stops when the
//! smallest adjusted p-value is not below the configured level. Structured
//! covariates are split either by expanding them into real components
//! (cubic B-spline coefficients, core-based shell distributions) or by
//! two-medoid clustering on their native distance.
//!
//! The crate is `no_std` with `alloc`. The default `std` feature enables
//! rayon-backed parallelism; results are bit-identical with or without it
//! because every random draw comes from a substream keyed by its position
//! in the computation rather than by execution order.
//!
//! File formats, model persistence and the command-line interface live in
//! the companion `etree` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod dataset;
pub mod distances;
pub mod energy;
pub mod expansion;
mod linalg;
mod par;
pub mod rng;
pub mod simulate;
pub mod split;
pub mod tree;

pub use dataset::{
    Adjacency, Covariate, CovariateData, Dataset, FunctionalColumn, GraphColumn, GraphKind,
    NodeView, Observation, Response, Violation,
};
pub use distances::DistanceMatrix;
pub use energy::{IndependenceTest, SelectionOutcome};
pub use expansion::{ComponentMatrix, Expansion};

pub use split::{Side, Split, SplitRule};
pub use tree::{EnergyTree, FitConfig, FitError, Prediction, SplitMethod};
