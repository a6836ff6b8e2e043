//! Recursive partitioning, prediction and text rendering.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    self, Covariate, CovariateData, DataError, Dataset, GraphKind, NodeView, Observation, Response,
};
use crate::distances::{self, DistanceError};
use crate::energy::{self, EnergyError, SelectionOutcome};
use crate::expansion::{
    ColumnExpansion, Expander, Expansion, ExpansionError, DEFAULT_N_BASIS, DEFAULT_SHELL_BINS,
};
use crate::par;
use crate::rng::{tag, Streams};
use crate::split::{
    self, apply_rule, Medoid, MedoidValue, Side, Split, SplitError, SplitRule,
};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_MIN_BUCKET: usize = 5;
pub const DEFAULT_PERMUTATIONS: usize = 999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    /// Expand structured covariates and split one component.
    Fve,
    /// Two-medoid clustering on the structured covariate's distance.
    Clustering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub alpha: f64,
    pub min_bucket: usize,
    pub n_permutations: usize,
    pub split_method: SplitMethod,
    /// Basis size per functional covariate, by name.
    pub n_basis: BTreeMap<String, usize>,
    pub default_n_basis: usize,
    /// Histogram bins per weighted-graph covariate, by name.
    pub shell_bins: BTreeMap<String, usize>,
    pub default_shell_bins: usize,
    pub seed: u64,
    pub max_depth: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            min_bucket: DEFAULT_MIN_BUCKET,
            n_permutations: DEFAULT_PERMUTATIONS,
            split_method: SplitMethod::Fve,
            n_basis: BTreeMap::new(),
            default_n_basis: DEFAULT_N_BASIS,
            shell_bins: BTreeMap::new(),
            default_shell_bins: DEFAULT_SHELL_BINS,
            seed: 0,
            max_depth: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |msg: String| Err(FitError::Config(msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.min_bucket == 0 {
            return bad("min_bucket must be at least 1".into());
        }
        if self.n_permutations == 0 {
            return bad("n_permutations must be at least 1".into());
        }
        if self.default_shell_bins == 0 || self.shell_bins.values().any(|&b| b == 0) {
            return bad("shell_bins must be at least 1".into());
        }
        Ok(())
    }

    pub fn n_basis_for(&self, name: &str) -> usize {
        self.n_basis.get(name).copied().unwrap_or(self.default_n_basis)
    }

    pub fn shell_bins_for(&self, name: &str) -> usize {
        self.shell_bins.get(name).copied().unwrap_or(self.default_shell_bins)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("configuration names unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("covariate `{covariate}`: {source}")]
    Expansion { covariate: String, source: ExpansionError },
    #[error("covariate `{covariate}`: {source}")]
    Split { covariate: String, source: SplitError },
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseSchema {
    Numeric,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateKind {
    Numeric,
    Nominal { levels: Vec<String> },
    Functional { grid: Vec<f64> },
    Graph { graph_kind: GraphKind, n_vertices: usize },
}

impl CovariateKind {
    pub fn name(&self) -> &'static str {
        match self {
            CovariateKind::Numeric => "numeric",
            CovariateKind::Nominal { .. } => "nominal",
            CovariateKind::Functional { .. } => "functional",
            CovariateKind::Graph { .. } => "graph",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSchema {
    pub name: String,
    pub kind: CovariateKind,
    /// Fitted expansion, when structured covariates are expanded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<Expansion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub response: ResponseSchema,
    pub covariates: Vec<CovariateSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeafPrediction {
    Regression { mean: f64, size: usize },
    Classification { counts: Vec<usize>, modal: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum TerminalReason {
    /// Fewer than `2ν` observations.
    TooSmall,
    MaxDepth,
    Pure,
    /// No adjusted p-value below α.
    NotSignificant,
    /// The selected covariate admits no split satisfying `ν`.
    NoValidSplit { detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Internal { split: Split, left: usize, right: usize },
    Terminal { reason: TerminalReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub depth: usize,
    pub weights: Vec<u32>,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionOutcome>,
    pub prediction: LeafPrediction,
    pub kind: NodeKind,
}

impl TreeNode {
    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, NodeKind::Terminal { .. })
    }

    pub fn kids(&self) -> Option<(usize, usize)> {
        match self.kind {
            NodeKind::Internal { left, right, .. } => Some((left, right)),
            NodeKind::Terminal { .. } => None,
        }
    }
}

/// A fitted tree. Node ids are depth-first, left-first; the root is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTree {
    pub config: FitConfig,
    pub schema: Schema,
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Numeric(f64),
    Class { code: u32, label: String },
}

impl Prediction {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Prediction::Numeric(v) => Some(*v),
            Prediction::Class { .. } => None,
        }
    }
}

struct Context<'a> {
    dataset: &'a Dataset,
    config: &'a FitConfig,
    expansions: Vec<Option<ColumnExpansion>>,
}

struct Grown {
    depth: usize,
    weights: Vec<u32>,
    size: usize,
    selection: Option<SelectionOutcome>,
    prediction: LeafPrediction,
    outcome: Outcome,
}

enum Outcome {
    Terminal(TerminalReason),
    Internal(Split, Box<(Grown, Grown)>),
}

pub fn fit(dataset: &Dataset, config: &FitConfig) -> Result<EnergyTree, FitError> {
    config.validate()?;
    let violations = dataset::validate(dataset);
    if !violations.is_empty() {
        return Err(DataError::Invalid(violations).into());
    }
    for name in config.n_basis.keys().chain(config.shell_bins.keys()) {
        if dataset.covariate_index(name).is_none() {
            return Err(FitError::UnknownCovariate(name.clone()));
        }
    }
    if dataset.covariates.is_empty() {
        return Err(EnergyError::NoCovariates.into());
    }

    let expansions = dataset
        .covariates
        .iter()
        .map(|cov| {
            if config.split_method != SplitMethod::Fve || !cov.is_structured() {
                return Ok(None);
            }
            ColumnExpansion::fit(cov, config.n_basis_for(&cov.name), config.shell_bins_for(&cov.name))
                .map(Some)
                .map_err(|source| FitError::Expansion { covariate: cov.name.clone(), source })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let schema = schema_of(dataset, &expansions);
    let ctx = Context { dataset, config, expansions };
    let root = grow(&ctx, vec![1; dataset.n], 0, Streams::new(config.seed).child(tag::ROOT, 0))?;

    let mut nodes = Vec::new();
    flatten(root, &mut nodes);
    Ok(EnergyTree { config: config.clone(), schema, nodes })
}

fn schema_of(dataset: &Dataset, expansions: &[Option<ColumnExpansion>]) -> Schema {
    let response = match &dataset.response {
        Response::Numeric { .. } => ResponseSchema::Numeric,
        Response::Categorical { levels, .. } => ResponseSchema::Categorical { levels: levels.clone() },
    };
    let covariates = dataset
        .covariates
        .iter()
        .zip(expansions)
        .map(|(cov, ex)| CovariateSchema {
            name: cov.name.clone(),
            kind: match &cov.data {
                CovariateData::Numeric { .. } => CovariateKind::Numeric,
                CovariateData::Nominal { levels, .. } => CovariateKind::Nominal { levels: levels.clone() },
                CovariateData::Functional(col) => CovariateKind::Functional { grid: col.grid.clone() },
                CovariateData::Graph(col) => CovariateKind::Graph {
                    graph_kind: col.kind,
                    n_vertices: col.n_vertices().unwrap_or(0),
                },
            },
            expansion: ex.as_ref().map(|e| e.expansion.clone()),
        })
        .collect();
    Schema { response, covariates }
}

fn flatten(node: Grown, out: &mut Vec<TreeNode>) -> usize {
    let id = out.len();
    out.push(TreeNode {
        id,
        depth: node.depth,
        weights: node.weights,
        size: node.size,
        selection: node.selection,
        prediction: node.prediction,
        kind: NodeKind::Terminal { reason: TerminalReason::TooSmall },
    });
    if let Outcome::Terminal(reason) = node.outcome {
        out[id].kind = NodeKind::Terminal { reason };
    } else if let Outcome::Internal(split, kids) = node.outcome {
        let (l, r) = *kids;
        let left = flatten(l, out);
        let right = flatten(r, out);
        out[id].kind = NodeKind::Internal { split, left, right };
    }
    id
}

fn leaf_prediction(response: &Response, view: &NodeView) -> LeafPrediction {
    match response {
        Response::Numeric { values } => {
            let size = view.len();
            let mean = view.indices().iter().map(|&i| values[i]).sum::<f64>() / size as f64;
            LeafPrediction::Regression { mean, size }
        }
        Response::Categorical { levels, codes } => {
            let mut counts = vec![0; levels.len()];
            for &i in view.indices() {
                counts[codes[i] as usize] += 1;
            }
            let modal = modal_class(&counts);
            LeafPrediction::Classification { counts, modal }
        }
    }
}

/// Most frequent class, lowest code on ties.
fn modal_class(counts: &[usize]) -> u32 {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u32
}

fn is_pure(response: &Response, view: &NodeView) -> bool {
    let idx = view.indices();
    match response {
        Response::Numeric { values } => idx.iter().all(|&i| values[i] == values[idx[0]]),
        Response::Categorical { codes, .. } => idx.iter().all(|&i| codes[i] == codes[idx[0]]),
    }
}

fn grow(ctx: &Context<'_>, weights: Vec<u32>, depth: usize, streams: Streams) -> Result<Grown, FitError> {
    let Context { dataset, config, .. } = ctx;
    let view = NodeView::from_weights(&weights);
    let size = view.len();
    let prediction = leaf_prediction(&dataset.response, &view);
    let mut node = Grown {
        depth,
        weights,
        size,
        selection: None,
        prediction,
        outcome: Outcome::Terminal(TerminalReason::TooSmall),
    };
    if size < 2 * config.min_bucket || size < 2 {
        return Ok(node);
    }
    if config.max_depth.is_some_and(|d| depth >= d) {
        node.outcome = Outcome::Terminal(TerminalReason::MaxDepth);
        return Ok(node);
    }
    if is_pure(&dataset.response, &view) {
        node.outcome = Outcome::Terminal(TerminalReason::Pure);
        return Ok(node);
    }

    let dy = distances::response_distances(&dataset.response, &view)?;
    let dxs = par::map_indexed(dataset.covariates.len(), |j| {
        distances::covariate_distances(&dataset.covariates[j], &view)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let selection =
        energy::select_variable(&dxs, &dy, config.alpha, config.n_permutations, &streams)?;
    let SelectionOutcome::Selected { covariate: j, .. } = selection else {
        node.selection = Some(selection);
        node.outcome = Outcome::Terminal(TerminalReason::NotSignificant);
        return Ok(node);
    };
    node.selection = Some(selection);

    let cov = &dataset.covariates[j];
    let split = match find_split(ctx, j, &view, &dxs[j], &dy, &streams) {
        Ok(split) => split,
        Err(e) if recoverable(&e) => {
            node.outcome = Outcome::Terminal(TerminalReason::NoValidSplit { detail: e.to_string() });
            return Ok(node);
        }
        Err(source) => return Err(FitError::Split { covariate: cov.name.clone(), source }),
    };

    let router = Router::new(&split.rule)
        .map_err(|source| FitError::Split { covariate: cov.name.clone(), source })?;
    let mut left = vec![0; dataset.n];
    let mut right = vec![0; dataset.n];
    for (i, &w) in node.weights.iter().enumerate() {
        if w == 0 {
            continue;
        }
        match router.route(cov.observation(i)) {
            Ok(Side::Left) => left[i] = w,
            Ok(Side::Right) => right[i] = w,
            Err(source) => return Err(FitError::Split { covariate: cov.name.clone(), source }),
        }
    }
    let n_left: usize = left.iter().map(|&w| w as usize).sum();
    if n_left < config.min_bucket || size - n_left < config.min_bucket {
        let detail = format!(
            "kid sizes {n_left} and {} violate the minimum of {}",
            size - n_left,
            config.min_bucket
        );
        node.outcome = Outcome::Terminal(TerminalReason::NoValidSplit { detail });
        return Ok(node);
    }

    let (l, r) = par::join(
        || grow(ctx, left, depth + 1, streams.child(tag::LEFT, 0)),
        || grow(ctx, right, depth + 1, streams.child(tag::RIGHT, 0)),
    );
    node.outcome = Outcome::Internal(split, Box::new((l?, r?)));
    Ok(node)
}

fn recoverable(e: &SplitError) -> bool {
    matches!(
        e,
        SplitError::Constant
            | SplitError::NoAdmissibleSplit { .. }
            | SplitError::AllComponentsConstant
            | SplitError::DegenerateDistances
    )
}

fn find_split(
    ctx: &Context<'_>,
    j: usize,
    view: &NodeView,
    dx: &distances::DistanceMatrix,
    dy: &distances::DistanceMatrix,
    streams: &Streams,
) -> Result<Split, SplitError> {
    let config = ctx.config;
    let cov = &ctx.dataset.covariates[j];
    let (b, nu) = (config.n_permutations, config.min_bucket);
    let idx = view.indices();
    match &cov.data {
        CovariateData::Numeric { values } => {
            let xs: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            let s = split::best_numeric_split(&xs, dy, b, streams, nu)?;
            Ok(Split {
                rule: SplitRule::NumericThreshold { covariate: j, threshold: s.threshold },
                p_value: Some(s.p_value),
            })
        }
        CovariateData::Nominal { codes, .. } => {
            let xs: Vec<u32> = idx.iter().map(|&i| codes[i]).collect();
            let s = split::best_nominal_split(&xs, dy, b, streams, nu)?;
            Ok(Split { rule: SplitRule::NominalSubset { covariate: j, levels: s.levels }, p_value: Some(s.p_value) })
        }
        _ => match (&ctx.expansions[j], config.split_method) {
            (Some(cache), SplitMethod::Fve) => {
                let s = split::fve_split(&cache.node_matrix(view), dy, b, streams, nu)?;
                Ok(Split {
                    rule: SplitRule::ComponentThreshold {
                        covariate: j,
                        expansion: cache.expansion.clone(),
                        component: s.component,
                        threshold: s.threshold,
                    },
                    p_value: Some(s.p_value),
                })
            }
            _ => {
                let pam = split::pam_two_medoids(dx)?;
                let [c1, c2] = pam.medoids;
                if idx[c1] == idx[c2] {
                    return Err(SplitError::DegenerateDistances);
                }
                let medoid = |c: usize| Medoid {
                    row: idx[c],
                    value: MedoidValue::from_observation(cov.observation(idx[c])),
                };
                Ok(Split {
                    rule: SplitRule::MedoidPair {
                        covariate: j,
                        left: medoid(c1),
                        right: medoid(c2),
                        distance: distances::distance_kind(cov),
                    },
                    p_value: None,
                })
            }
        },
    }
}

/// A split rule with its expansion projector prepared once.
struct Router<'a> {
    rule: &'a SplitRule,
    expander: Option<Expander<'a>>,
}

impl<'a> Router<'a> {
    fn new(rule: &'a SplitRule) -> Result<Self, SplitError> {
        let expander = match rule {
            SplitRule::ComponentThreshold { expansion, .. } => Some(expansion.expander()?),
            _ => None,
        };
        Ok(Self { rule, expander })
    }

    fn route(&self, obs: Observation<'_>) -> Result<Side, SplitError> {
        match (self.rule, &self.expander) {
            (SplitRule::ComponentThreshold { component, threshold, .. }, Some(ex)) => {
                let comps = ex.expand(obs).map_err(|e| match e {
                    ExpansionError::TypeMismatch => SplitError::TypeMismatch,
                    e => e.into(),
                })?;
                Ok(if comps[*component] <= *threshold { Side::Left } else { Side::Right })
            }
            _ => apply_rule(self.rule, obs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("covariate `{0}` is missing")]
    MissingCovariate(String),
    #[error("covariate `{name}` is {found}, the model expects {expected}")]
    KindMismatch { name: String, expected: &'static str, found: &'static str },
    #[error("covariate `{covariate}`, row {row}: unknown level `{level}`")]
    UnknownLevel { covariate: String, row: usize, level: String },
    #[error("covariate `{covariate}`: grid differs from the training grid ({found} points, expected {expected})")]
    GridMismatch { covariate: String, expected: usize, found: usize },
    #[error("covariate `{covariate}`: graphs are {found}, the model expects {expected}")]
    GraphKindMismatch { covariate: String, expected: &'static str, found: &'static str },
    #[error("covariate `{covariate}`, row {row}: {found} vertices, expected {expected}")]
    VertexMismatch { covariate: String, row: usize, expected: usize, found: usize },
    #[error("covariate `{covariate}` has {found} rows, expected {expected}")]
    RowCount { covariate: String, expected: usize, found: usize },
    #[error("covariate `{covariate}`, row {row}: {source}")]
    Routing { covariate: String, row: usize, source: SplitError },
}

fn graph_kind_name(kind: GraphKind) -> &'static str {
    match kind {
        GraphKind::Binary => "binary",
        GraphKind::Weighted => "weighted",
    }
}

/// Covariate columns matched to the schema order, nominal codes recoded to
/// the training level table.
struct Aligned<'a> {
    columns: Vec<&'a Covariate>,
    recoded: Vec<Option<Vec<u32>>>,
    n: usize,
}

impl Aligned<'_> {
    fn observation(&self, j: usize, i: usize) -> Observation<'_> {
        match &self.recoded[j] {
            Some(codes) => Observation::Nominal(codes[i]),
            None => self.columns[j].observation(i),
        }
    }
}

fn align<'a>(schema: &Schema, covariates: &'a [Covariate]) -> Result<Aligned<'a>, PredictError> {
    let mut columns = Vec::with_capacity(schema.covariates.len());
    let mut recoded = Vec::with_capacity(schema.covariates.len());
    let mut n = None;
    for cs in &schema.covariates {
        let cov = covariates
            .iter()
            .find(|c| c.name == cs.name)
            .ok_or_else(|| PredictError::MissingCovariate(cs.name.clone()))?;
        let rows = cov.len();
        match n {
            None => n = Some(rows),
            Some(expected) if expected != rows => {
                return Err(PredictError::RowCount { covariate: cs.name.clone(), expected, found: rows })
            }
            _ => {}
        }
        let mismatch = || PredictError::KindMismatch {
            name: cs.name.clone(),
            expected: cs.kind.name(),
            found: cov.kind_name(),
        };
        let mut codes_out = None;
        match (&cs.kind, &cov.data) {
            (CovariateKind::Numeric, CovariateData::Numeric { .. }) => {}
            (CovariateKind::Nominal { levels: trained }, CovariateData::Nominal { levels, codes }) => {
                let map: Vec<Option<u32>> = levels
                    .iter()
                    .map(|l| trained.iter().position(|t| t == l).map(|p| p as u32))
                    .collect();
                let mut out = Vec::with_capacity(codes.len());
                for (row, &c) in codes.iter().enumerate() {
                    match map.get(c as usize).copied().flatten() {
                        Some(code) => out.push(code),
                        None => {
                            return Err(PredictError::UnknownLevel {
                                covariate: cs.name.clone(),
                                row,
                                level: levels.get(c as usize).cloned().unwrap_or_else(|| format!("#{c}")),
                            })
                        }
                    }
                }
                codes_out = Some(out);
            }
            (CovariateKind::Functional { grid: trained }, CovariateData::Functional(col)) => {
                let same = trained.len() == col.grid.len()
                    && trained.iter().zip(&col.grid).all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
                if !same {
                    return Err(PredictError::GridMismatch {
                        covariate: cs.name.clone(),
                        expected: trained.len(),
                        found: col.grid.len(),
                    });
                }
            }
            (CovariateKind::Graph { graph_kind, n_vertices }, CovariateData::Graph(col)) => {
                if *graph_kind != col.kind {
                    return Err(PredictError::GraphKindMismatch {
                        covariate: cs.name.clone(),
                        expected: graph_kind_name(*graph_kind),
                        found: graph_kind_name(col.kind),
                    });
                }
                if let Some((row, g)) = col.graphs.iter().enumerate().find(|(_, g)| g.n_vertices() != *n_vertices) {
                    return Err(PredictError::VertexMismatch {
                        covariate: cs.name.clone(),
                        row,
                        expected: *n_vertices,
                        found: g.n_vertices(),
                    });
                }
            }
            _ => return Err(mismatch()),
        }
        columns.push(cov);
        recoded.push(codes_out);
    }
    Ok(Aligned { columns, recoded, n: n.unwrap_or(0) })
}

impl EnergyTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_terminal()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Terminal node id reached by each row of `covariates`.
    pub fn leaves(&self, covariates: &[Covariate]) -> Result<Vec<usize>, PredictError> {
        let aligned = align(&self.schema, covariates)?;
        let routers: Vec<Option<Router<'_>>> = self
            .nodes
            .iter()
            .map(|node| match &node.kind {
                NodeKind::Internal { split, .. } => Router::new(&split.rule).map(Some),
                NodeKind::Terminal { .. } => Ok(None),
            })
            .collect::<Result<_, _>>()
            .map_err(|source| PredictError::Routing { covariate: String::new(), row: 0, source })?;
        par::map_indexed(aligned.n, |i| {
            let mut id = 0;
            while let NodeKind::Internal { split, left, right } = &self.nodes[id].kind {
                let j = split.rule.covariate();
                let router = routers[id].as_ref().expect("internal node router");
                id = match router.route(aligned.observation(j, i)) {
                    Ok(Side::Left) => *left,
                    Ok(Side::Right) => *right,
                    Err(source) => {
                        return Err(PredictError::Routing {
                            covariate: self.schema.covariates[j].name.clone(),
                            row: i,
                            source,
                        })
                    }
                };
            }
            Ok(id)
        })
        .into_iter()
        .collect()
    }

    /// Leaf mean (regression) or modal class (classification) per row.
    pub fn predict(&self, covariates: &[Covariate]) -> Result<Vec<Prediction>, PredictError> {
        Ok(self.leaves(covariates)?.into_iter().map(|id| self.node_prediction(id)).collect())
    }

    pub fn node_prediction(&self, id: usize) -> Prediction {
        match (&self.nodes[id].prediction, &self.schema.response) {
            (LeafPrediction::Regression { mean, .. }, _) => Prediction::Numeric(*mean),
            (LeafPrediction::Classification { modal, .. }, ResponseSchema::Categorical { levels }) => {
                Prediction::Class { code: *modal, label: levels[*modal as usize].clone() }
            }
            (LeafPrediction::Classification { modal, .. }, ResponseSchema::Numeric) => {
                Prediction::Class { code: *modal, label: modal.to_string() }
            }
        }
    }

    /// Indented outline, one line per node.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.render_node(0, &mut out);
        out
    }

    fn render_node(&self, id: usize, out: &mut String) {
        let node = &self.nodes[id];
        let indent = "  ".repeat(node.depth);
        let _ = write!(out, "{indent}[{id}] n={}", node.size);
        match &node.kind {
            NodeKind::Internal { split, left, right } => {
                let cs = &self.schema.covariates[split.rule.covariate()];
                let levels = match &cs.kind {
                    CovariateKind::Nominal { levels } => Some(levels.as_slice()),
                    _ => None,
                };
                let _ = write!(out, " split {}", split::describe_rule(&split.rule, &cs.name, levels));
                if let Some(p) = split.p_value {
                    let _ = write!(out, " (p = {p:.4})");
                }
                out.push('\n');
                self.render_node(*left, out);
                self.render_node(*right, out);
            }
            NodeKind::Terminal { .. } => {
                match (&node.prediction, &self.schema.response) {
                    (LeafPrediction::Regression { mean, .. }, _) => {
                        let _ = write!(out, " mean = {mean:.4}");
                    }
                    (LeafPrediction::Classification { counts, modal }, response) => {
                        let name = |c: usize| match response {
                            ResponseSchema::Categorical { levels } => levels[c].clone(),
                            ResponseSchema::Numeric => c.to_string(),
                        };
                        let balance: Vec<String> =
                            counts.iter().enumerate().map(|(c, k)| format!("{}: {k}", name(c))).collect();
                        let _ = write!(out, " class = {} [{}]", name(*modal as usize), balance.join(", "));
                    }
                }
                out.push('\n');
            }
        }
    }
}
