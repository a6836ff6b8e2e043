//! Mixed-type learning samples and node-local views.
//!
//! A [`Dataset`] holds a response and an ordered list of covariates over the
//! same `n` observations. Covariates may be numeric, nominal, functional
//! (curves discretized on a grid shared by the whole column) or graphs
//! (dense symmetric adjacency matrices with a zero diagonal).
//!
//! Tree nodes are described by integer case weights; [`NodeView`] expands
//! them into the enumeration of observation indices used by every
//! node-local computation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    Numeric { values: Vec<f64> },
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Numeric { values } => values.len(),
            Response::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Response::Categorical { .. })
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self {
            Response::Numeric { .. } => None,
            Response::Categorical { levels, .. } => Some(levels.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Binary,
    Weighted,
}

/// Dense row-major adjacency matrix of an undirected graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    n_vertices: usize,
    entries: Vec<f64>,
}

impl Adjacency {
    /// Wraps `entries` (row-major, `n_vertices²` long) without checking
    /// symmetry; see [`validate`] for the full set of checks.
    pub fn from_entries(n_vertices: usize, entries: Vec<f64>) -> Result<Self, DataError> {
        if entries.len() != n_vertices * n_vertices {
            return Err(DataError::Shape(format!(
                "adjacency with {n_vertices} vertices needs {} entries, got {}",
                n_vertices * n_vertices,
                entries.len()
            )));
        }
        Ok(Self { n_vertices, entries })
    }

    pub fn empty(n_vertices: usize) -> Self {
        Self { n_vertices, entries: alloc::vec![0.0; n_vertices * n_vertices] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let v = rows.len();
        let mut entries = Vec::with_capacity(v * v);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != v {
                return Err(DataError::Shape(format!(
                    "adjacency row {r} has {} entries, expected {v}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { n_vertices: v, entries })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.entries[u * self.n_vertices + v]
    }

    /// Sets both `(u, v)` and `(v, u)`.
    pub fn set_edge(&mut self, u: usize, v: usize, weight: f64) {
        self.entries[u * self.n_vertices + v] = weight;
        self.entries[v * self.n_vertices + u] = weight;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.entries[u * self.n_vertices..(u + 1) * self.n_vertices]
    }

    /// First structural problem found, if any.
    pub fn check(&self, kind: GraphKind) -> Option<Problem> {
        let v = self.n_vertices;
        for u in 0..v {
            for w in 0..v {
                let x = self.get(u, w);
                if !x.is_finite() {
                    return Some(Problem::NonFinite);
                }
                if u == w && x != 0.0 {
                    return Some(Problem::NonZeroDiagonal { vertex: u });
                }
                if x < 0.0 {
                    return Some(Problem::NegativeWeight { u, v: w });
                }
                if kind == GraphKind::Binary && x != 0.0 && x != 1.0 {
                    return Some(Problem::NonBinary { u, v: w, value: x });
                }
                if w > u && x != self.get(w, u) {
                    return Some(Problem::Asymmetric { u, v: w });
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalColumn {
    pub grid: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphColumn {
    pub kind: GraphKind,
    pub graphs: Vec<Adjacency>,
}

impl GraphColumn {
    pub fn n_vertices(&self) -> Option<usize> {
        self.graphs.first().map(Adjacency::n_vertices)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateData {
    Numeric { values: Vec<f64> },
    Nominal { levels: Vec<String>, codes: Vec<u32> },
    Functional(FunctionalColumn),
    Graph(GraphColumn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    pub data: CovariateData,
}

/// One observation of one covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation<'a> {
    Numeric(f64),
    Nominal(u32),
    Functional { values: &'a [f64], grid: &'a [f64] },
    Graph(&'a Adjacency),
}

impl Covariate {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), data: CovariateData::Numeric { values } }
    }

    pub fn nominal(name: impl Into<String>, levels: Vec<String>, codes: Vec<u32>) -> Self {
        Self { name: name.into(), data: CovariateData::Nominal { levels, codes } }
    }

    pub fn functional(name: impl Into<String>, grid: Vec<f64>, curves: Vec<Vec<f64>>) -> Self {
        Self { name: name.into(), data: CovariateData::Functional(FunctionalColumn { grid, curves }) }
    }

    pub fn graph(name: impl Into<String>, kind: GraphKind, graphs: Vec<Adjacency>) -> Self {
        Self { name: name.into(), data: CovariateData::Graph(GraphColumn { kind, graphs }) }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            CovariateData::Numeric { values } => values.len(),
            CovariateData::Nominal { codes, .. } => codes.len(),
            CovariateData::Functional(f) => f.curves.len(),
            CovariateData::Graph(g) => g.graphs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.data {
            CovariateData::Numeric { .. } => "numeric",
            CovariateData::Nominal { .. } => "nominal",
            CovariateData::Functional(_) => "functional",
            CovariateData::Graph(_) => "graph",
        }
    }

    pub fn is_structured(&self) -> bool {
        matches!(self.data, CovariateData::Functional(_) | CovariateData::Graph(_))
    }

    pub fn observation(&self, i: usize) -> Observation<'_> {
        match &self.data {
            CovariateData::Numeric { values } => Observation::Numeric(values[i]),
            CovariateData::Nominal { codes, .. } => Observation::Nominal(codes[i]),
            CovariateData::Functional(f) => {
                Observation::Functional { values: &f.curves[i], grid: &f.grid }
            }
            CovariateData::Graph(g) => Observation::Graph(&g.graphs[i]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n: usize,
    pub response: Response,
    pub covariates: Vec<Covariate>,
}

impl Dataset {
    /// Builds a dataset and rejects it unless [`validate`] finds nothing.
    pub fn new(response: Response, covariates: Vec<Covariate>) -> Result<Self, DataError> {
        let ds = Self { n: response.len(), response, covariates };
        let violations = validate(&ds);
        if violations.is_empty() {
            Ok(ds)
        } else {
            Err(DataError::Invalid(violations))
        }
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c.name == name)
    }
}

/// What is wrong, independent of where.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Problem {
    #[error("dataset has no observations")]
    Empty,
    #[error("length {found} does not match n = {expected}")]
    Length { expected: usize, found: usize },
    #[error("categorical response needs at least 2 levels, found {0}")]
    TooFewClasses(usize),
    #[error("level code {code} out of range for {levels} levels")]
    CodeOutOfRange { code: u32, levels: usize },
    #[error("non-finite value")]
    NonFinite,
    #[error("duplicate covariate name")]
    DuplicateName,
    #[error("functional grid needs at least 2 points, found {0}")]
    GridTooShort(usize),
    #[error("functional grid is not strictly increasing at position {position}")]
    UnsortedGrid { position: usize },
    #[error("curve has {found} values but the grid has {expected}")]
    CurveLength { expected: usize, found: usize },
    #[error("graph has {found} vertices but the column uses {expected}")]
    VertexCount { expected: usize, found: usize },
    #[error("adjacency is not symmetric at ({u}, {v})")]
    Asymmetric { u: usize, v: usize },
    #[error("adjacency diagonal entry {vertex} is non-zero")]
    NonZeroDiagonal { vertex: usize },
    #[error("negative edge weight at ({u}, {v})")]
    NegativeWeight { u: usize, v: usize },
    #[error("binary graph has entry {value} at ({u}, {v})")]
    NonBinary { u: usize, v: usize, value: f64 },
}

/// An invariant violation located by covariate name (none for the response)
/// and row.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub covariate: Option<String>,
    pub row: Option<usize>,
    pub problem: Problem,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.covariate {
            Some(name) => write!(f, "covariate `{name}`")?,
            None => write!(f, "response")?,
        }
        if let Some(row) = self.row {
            write!(f, ", row {row}")?;
        }
        write!(f, ": {}", self.problem)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("invalid dataset: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("{0}")]
    Shape(String),
    #[error("case weight {value} at row {row} is not a non-negative integer")]
    BadWeight { row: usize, value: f64 },
    #[error("expected {expected} case weights, got {found}")]
    WeightLength { expected: usize, found: usize },
}

fn join_violations(v: &[Violation]) -> String {
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&format!("{x}"));
    }
    out
}

fn check_codes(
    out: &mut Vec<Violation>,
    covariate: Option<&str>,
    codes: &[u32],
    levels: usize,
) {
    for (row, &code) in codes.iter().enumerate() {
        if code as usize >= levels {
            out.push(Violation {
                covariate: covariate.map(String::from),
                row: Some(row),
                problem: Problem::CodeOutOfRange { code, levels },
            });
        }
    }
}

fn check_finite(out: &mut Vec<Violation>, covariate: Option<&str>, values: &[f64]) {
    for (row, v) in values.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation {
                covariate: covariate.map(String::from),
                row: Some(row),
                problem: Problem::NonFinite,
            });
        }
    }
}

/// Every invariant violation in `dataset`; empty means valid.
pub fn validate(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = dataset.n;
    let at = |covariate: Option<&str>, row: Option<usize>, problem: Problem| Violation {
        covariate: covariate.map(String::from),
        row,
        problem,
    };
    if n == 0 {
        out.push(at(None, None, Problem::Empty));
    }
    if dataset.response.len() != n {
        out.push(at(None, None, Problem::Length { expected: n, found: dataset.response.len() }));
    }
    match &dataset.response {
        Response::Numeric { values } => check_finite(&mut out, None, values),
        Response::Categorical { levels, codes } => {
            if levels.len() < 2 {
                out.push(at(None, None, Problem::TooFewClasses(levels.len())));
            }
            check_codes(&mut out, None, codes, levels.len());
        }
    }

    let mut names = BTreeSet::new();
    for cov in &dataset.covariates {
        let name = Some(cov.name.as_str());
        if !names.insert(cov.name.as_str()) {
            out.push(at(name, None, Problem::DuplicateName));
        }
        if cov.len() != n {
            out.push(at(name, None, Problem::Length { expected: n, found: cov.len() }));
        }
        match &cov.data {
            CovariateData::Numeric { values } => check_finite(&mut out, name, values),
            CovariateData::Nominal { levels, codes } => {
                check_codes(&mut out, name, codes, levels.len())
            }
            CovariateData::Functional(col) => {
                if col.grid.len() < 2 {
                    out.push(at(name, None, Problem::GridTooShort(col.grid.len())));
                }
                check_finite(&mut out, name, &col.grid);
                if let Some(p) = col.grid.windows(2).position(|w| !(w[0] < w[1])) {
                    out.push(at(name, None, Problem::UnsortedGrid { position: p + 1 }));
                }
                for (row, curve) in col.curves.iter().enumerate() {
                    if curve.len() != col.grid.len() {
                        out.push(at(
                            name,
                            Some(row),
                            Problem::CurveLength { expected: col.grid.len(), found: curve.len() },
                        ));
                    } else if curve.iter().any(|v| !v.is_finite()) {
                        out.push(at(name, Some(row), Problem::NonFinite));
                    }
                }
            }
            CovariateData::Graph(col) => {
                let expected = col.n_vertices().unwrap_or(0);
                for (row, g) in col.graphs.iter().enumerate() {
                    if g.n_vertices() != expected {
                        out.push(at(
                            name,
                            Some(row),
                            Problem::VertexCount { expected, found: g.n_vertices() },
                        ));
                    }
                    if let Some(problem) = g.check(col.kind) {
                        out.push(at(name, Some(row), problem));
                    }
                }
            }
        }
    }
    out
}

/// Converts real-valued case weights, rejecting negative or fractional ones.
pub fn weights_from_reals(weights: &[f64]) -> Result<Vec<u32>, DataError> {
    weights
        .iter()
        .enumerate()
        .map(|(row, &w)| {
            if w.is_finite() && w >= 0.0 && w == libm::floor(w) && w <= u32::MAX as f64 {
                Ok(w as u32)
            } else {
                Err(DataError::BadWeight { row, value: w })
            }
        })
        .collect()
}

/// The observations of a node, each index `i` repeated `w[i]` times, in
/// ascending index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeView {
    indices: Vec<usize>,
}

impl NodeView {
    pub fn from_weights(weights: &[u32]) -> Self {
        let mut indices = Vec::with_capacity(weights.iter().map(|&w| w as usize).sum());
        for (i, &w) in weights.iter().enumerate() {
            indices.extend(core::iter::repeat_n(i, w as usize));
        }
        Self { indices }
    }

    pub fn full(n: usize) -> Self {
        Self { indices: (0..n).collect() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `Y^w` for a numeric response.
    pub fn numeric_response(&self, response: &Response) -> Option<Vec<f64>> {
        match response {
            Response::Numeric { values } => Some(self.indices.iter().map(|&i| values[i]).collect()),
            Response::Categorical { .. } => None,
        }
    }

    /// `X_j^w` as observations.
    pub fn observations<'a>(&self, covariate: &'a Covariate) -> Vec<Observation<'a>> {
        self.indices.iter().map(|&i| covariate.observation(i)).collect()
    }
}

/// Node view of `dataset` for case weights `weights`.
pub fn subset_view(dataset: &Dataset, weights: &[u32]) -> Result<NodeView, DataError> {
    if weights.len() != dataset.n {
        return Err(DataError::WeightLength { expected: dataset.n, found: weights.len() });
    }
    Ok(NodeView::from_weights(weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn numeric_ds(values: Vec<f64>) -> Dataset {
        Dataset::new(
            Response::Numeric { values: values.clone() },
            vec![Covariate::numeric("x", values)],
        )
        .unwrap()
    }

    #[test]
    fn valid_dataset_has_no_violations() {
        let ds = numeric_ds(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(ds.n, 5);
        assert!(validate(&ds).is_empty());
    }

    #[test]
    fn single_class_response_is_one_violation() {
        let ds = Dataset {
            n: 2,
            response: Response::Categorical { levels: vec!["a".to_string()], codes: vec![0, 0] },
            covariates: vec![Covariate::numeric("x", vec![1.0, 2.0])],
        };
        let v = validate(&ds);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].problem, Problem::TooFewClasses(1));
    }

    #[test]
    fn mixed_vertex_counts_are_one_violation() {
        let ds = Dataset {
            n: 2,
            response: Response::Numeric { values: vec![0.0, 1.0] },
            covariates: vec![Covariate::graph(
                "g",
                GraphKind::Binary,
                vec![Adjacency::empty(4), Adjacency::empty(5)],
            )],
        };
        let v = validate(&ds);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].row, Some(1));
        assert_eq!(v[0].problem, Problem::VertexCount { expected: 4, found: 5 });
    }

    #[test]
    fn reports_every_violation_with_location() {
        let mut asym = Adjacency::empty(3);
        asym.entries[1] = 1.0;
        let ds = Dataset {
            n: 2,
            response: Response::Numeric { values: vec![0.0, f64::NAN] },
            covariates: vec![
                Covariate::functional("f", vec![0.0, 0.5, 0.25], vec![vec![0.0; 3], vec![0.0; 2]]),
                Covariate::graph("g", GraphKind::Binary, vec![Adjacency::empty(3), asym]),
                Covariate::numeric("f", vec![1.0]),
            ],
        };
        let v = validate(&ds);
        let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        assert!(msgs.contains(&"response, row 1: non-finite value".to_string()), "{msgs:?}");
        assert!(v.iter().any(|x| x.problem == Problem::UnsortedGrid { position: 2 }));
        assert!(v.iter().any(|x| x.row == Some(1)
            && x.problem == Problem::CurveLength { expected: 3, found: 2 }));
        assert!(v.iter().any(|x| x.covariate.as_deref() == Some("g")
            && x.row == Some(1)
            && x.problem == Problem::Asymmetric { u: 0, v: 1 }));
        assert!(v.iter().any(|x| x.problem == Problem::DuplicateName));
        assert!(v.iter().any(|x| x.problem == Problem::Length { expected: 2, found: 1 }));
    }

    #[test]
    fn subset_view_repeats_by_weight() {
        let ds = numeric_ds(vec![1.0, 2.0, 4.0]);
        let view = subset_view(&ds, &[1, 1, 1]).unwrap();
        assert_eq!(view.indices(), &[0, 1, 2]);
        let view = subset_view(&ds, &[2, 0, 1]).unwrap();
        assert_eq!(view.len(), 3);
        assert_eq!(view.indices(), &[0, 0, 2]);
        assert_eq!(view.numeric_response(&ds.response).unwrap(), vec![1.0, 1.0, 4.0]);
        assert!(subset_view(&ds, &[0, 0, 0]).unwrap().is_empty());
        assert!(subset_view(&ds, &[1, 1]).is_err());
    }

    #[test]
    fn fractional_and_negative_weights_rejected() {
        assert_eq!(weights_from_reals(&[2.0, 0.0, 1.0]).unwrap(), vec![2, 0, 1]);
        assert_eq!(
            weights_from_reals(&[1.0, 0.5]),
            Err(DataError::BadWeight { row: 1, value: 0.5 })
        );
        assert!(weights_from_reals(&[-1.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn view_size_is_weight_sum(w in proptest::collection::vec(0u32..5, 0..40)) {
            let view = NodeView::from_weights(&w);
            proptest::prop_assert_eq!(view.len() as u32, w.iter().sum::<u32>());
            proptest::prop_assert!(view.indices().windows(2).all(|p| p[0] <= p[1]));
        }
    }
}
