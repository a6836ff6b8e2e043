//! Split search for the selected covariate.
//!
//! Numeric and nominal covariates, and the real components of an expanded
//! structured covariate, are split by testing every admissible candidate
//! set `Q` with an energy test between the membership indicator of `Q` and
//! the response. Structured covariates may instead be split by two-medoid
//! PAM clustering on their own distance, routing each observation to the
//! nearer medoid (the first medoid on ties).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Adjacency, Observation};
use crate::distances::{self, DistanceError, DistanceKind, DistanceMatrix};
use crate::energy::{centered_test, Centered, EnergyError};
use crate::expansion::{ComponentMatrix, Expansion, ExpansionError};
use crate::par;
use crate::rng::{tag, Streams};

/// Largest number of nominal levels whose non-trivial subsets are enumerated.
pub const MAX_NOMINAL_LEVELS: usize = 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("candidate set selects all or none of the node's observations")]
    TrivialCandidate,
    #[error("covariate is constant within the node")]
    Constant,
    #[error("every candidate split leaves a kid node with fewer than {min_bucket} observations")]
    NoAdmissibleSplit { min_bucket: usize },
    #[error("{found} nominal levels present, at most {max} supported")]
    TooManyLevels { found: usize, max: usize },
    #[error("every expanded component is constant within the node")]
    AllComponentsConstant,
    #[error("all pairwise distances are zero; no bipartition exists")]
    DegenerateDistances,
    #[error("need at least {needed} observations, got {found}")]
    TooFew { needed: usize, found: usize },
    #[error("observation type does not match the split rule")]
    TypeMismatch,
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// A medoid observation stored by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MedoidValue {
    Numeric { value: f64 },
    Nominal { code: u32 },
    Functional { values: Vec<f64>, grid: Vec<f64> },
    Graph { adjacency: Adjacency },
}

impl MedoidValue {
    pub fn from_observation(obs: Observation<'_>) -> Self {
        match obs {
            Observation::Numeric(value) => MedoidValue::Numeric { value },
            Observation::Nominal(code) => MedoidValue::Nominal { code },
            Observation::Functional { values, grid } => {
                MedoidValue::Functional { values: values.to_vec(), grid: grid.to_vec() }
            }
            Observation::Graph(adj) => MedoidValue::Graph { adjacency: adj.clone() },
        }
    }

    pub fn as_observation(&self) -> Observation<'_> {
        match self {
            MedoidValue::Numeric { value } => Observation::Numeric(*value),
            MedoidValue::Nominal { code } => Observation::Nominal(*code),
            MedoidValue::Functional { values, grid } => Observation::Functional { values, grid },
            MedoidValue::Graph { adjacency } => Observation::Graph(adjacency),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Medoid {
    /// Training row the medoid was taken from.
    pub row: usize,
    pub value: MedoidValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    /// Left iff `x <= threshold`.
    NumericThreshold { covariate: usize, threshold: f64 },
    /// Left iff the level code is in `levels`.
    NominalSubset { covariate: usize, levels: Vec<u32> },
    /// Left iff component `component` of the expanded observation is
    /// `<= threshold`.
    ComponentThreshold { covariate: usize, expansion: Expansion, component: usize, threshold: f64 },
    /// Left iff `δ(x, left) <= δ(x, right)`.
    MedoidPair { covariate: usize, left: Medoid, right: Medoid, distance: DistanceKind },
}

impl SplitRule {
    pub fn covariate(&self) -> usize {
        match self {
            SplitRule::NumericThreshold { covariate, .. }
            | SplitRule::NominalSubset { covariate, .. }
            | SplitRule::ComponentThreshold { covariate, .. }
            | SplitRule::MedoidPair { covariate, .. } => *covariate,
        }
    }
}

/// A rule plus the p-value of its split test; clustering splits carry no
/// test and therefore no p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub rule: SplitRule,
    pub p_value: Option<f64>,
}

/// Routes one observation.
pub fn apply_rule(rule: &SplitRule, obs: Observation<'_>) -> Result<Side, SplitError> {
    let left = match (rule, obs) {
        (SplitRule::NumericThreshold { threshold, .. }, Observation::Numeric(x)) => x <= *threshold,
        (SplitRule::NominalSubset { levels, .. }, Observation::Nominal(code)) => {
            levels.contains(&code)
        }
        (SplitRule::ComponentThreshold { expansion, component, threshold, .. }, obs) => {
            let components = expansion.expand(obs).map_err(|e| match e {
                ExpansionError::TypeMismatch => SplitError::TypeMismatch,
                e => e.into(),
            })?;
            components[*component] <= *threshold
        }
        (SplitRule::MedoidPair { left, right, .. }, obs) => {
            let to_left = distances::observation_distance(obs, left.value.as_observation());
            let to_right = distances::observation_distance(obs, right.value.as_observation());
            match (to_left, to_right) {
                (Ok(a), Ok(b)) => a <= b,
                (Err(DistanceError::TypeMismatch), _) | (_, Err(DistanceError::TypeMismatch)) => {
                    return Err(SplitError::TypeMismatch)
                }
                (Err(e), _) | (_, Err(e)) => return Err(e.into()),
            }
        }
        _ => return Err(SplitError::TypeMismatch),
    };
    Ok(if left { Side::Left } else { Side::Right })
}

/// `ℓ_Q`: membership of each node observation in the candidate set.
pub fn candidate_indicator<T>(
    xs: &[T],
    in_candidate: impl Fn(&T) -> bool,
) -> Result<Vec<bool>, SplitError> {
    let ind: Vec<bool> = xs.iter().map(in_candidate).collect();
    let inside = ind.iter().filter(|&&b| b).count();
    if inside == 0 || inside == ind.len() {
        return Err(SplitError::TrivialCandidate);
    }
    Ok(ind)
}

/// Right-closed thresholds `x_(1) .. x_(k-1)` over the sorted distinct values.
pub fn numeric_thresholds(xs: &[f64]) -> Vec<f64> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.pop();
    sorted
}

/// Non-trivial level subsets of `present`, one per complementary pair:
/// every subset contains `present[0]`.
pub fn nominal_candidates(present: &[u32]) -> Vec<Vec<u32>> {
    let Some((&first, rest)) = present.split_first() else { return Vec::new() };
    let full = (1u64 << rest.len()) - 1;
    (0..full)
        .map(|mask| {
            let mut subset = vec![first];
            subset.extend(rest.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &l)| l));
            subset
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    index: usize,
    statistic: f64,
    p_value: f64,
}

/// Smallest p-value; ties go to the larger statistic, then the earlier
/// candidate.
fn best_of(scored: impl IntoIterator<Item = Scored>) -> Option<Scored> {
    scored.into_iter().fold(None, |best, s| match best {
        Some(b) if !(s.p_value < b.p_value || (s.p_value == b.p_value && s.statistic > b.statistic)) => {
            Some(b)
        }
        _ => Some(s),
    })
}

/// Tests each admissible indicator against the response.
fn test_candidates(
    indicators: &[Option<Vec<bool>>],
    by: &Centered,
    n_permutations: usize,
    streams: &Streams,
) -> Result<Option<Scored>, SplitError> {
    let results = par::map_indexed(indicators.len(), |c| {
        let Some(ind) = &indicators[c] else { return Ok(None) };
        let ax = Centered::new(&DistanceMatrix::from_indicator(ind));
        let stream = streams.child(tag::SPLIT_CANDIDATE, c as u64);
        let (statistic, p_value) = centered_test(&ax, by, n_permutations, &stream)?;
        Ok::<_, EnergyError>(Some(Scored { index: c, statistic, p_value }))
    });
    let scored = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(best_of(scored.into_iter().flatten()))
}

fn admissible(ind: &[bool], min_bucket: usize) -> bool {
    let left = ind.iter().filter(|&&b| b).count();
    left >= min_bucket.max(1) && ind.len() - left >= min_bucket.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericSplit {
    pub threshold: f64,
    pub p_value: f64,
    pub statistic: f64,
}

/// Best right-closed threshold split of a numeric node column.
///
/// Candidate `c` (in ascending threshold order) tests with substream
/// `(SPLIT_CANDIDATE, c)`; candidates leaving fewer than `min_bucket`
/// observations on either side are skipped.
pub fn best_numeric_split(
    xs: &[f64],
    dy: &DistanceMatrix,
    n_permutations: usize,
    streams: &Streams,
    min_bucket: usize,
) -> Result<NumericSplit, SplitError> {
    numeric_split_centered(xs, &Centered::new(dy), n_permutations, streams, min_bucket)
}

fn numeric_split_centered(
    xs: &[f64],
    by: &Centered,
    n_permutations: usize,
    streams: &Streams,
    min_bucket: usize,
) -> Result<NumericSplit, SplitError> {
    if xs.len() != by.size() {
        return Err(EnergyError::SizeMismatch(xs.len(), by.size()).into());
    }
    let thresholds = numeric_thresholds(xs);
    if thresholds.is_empty() {
        return Err(SplitError::Constant);
    }
    let indicators: Vec<Option<Vec<bool>>> = thresholds
        .iter()
        .map(|&q| {
            candidate_indicator(xs, |&x| x <= q).ok().filter(|ind| admissible(ind, min_bucket))
        })
        .collect();
    let best = test_candidates(&indicators, by, n_permutations, streams)?
        .ok_or(SplitError::NoAdmissibleSplit { min_bucket })?;
    Ok(NumericSplit { threshold: thresholds[best.index], p_value: best.p_value, statistic: best.statistic })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalSplit {
    pub levels: Vec<u32>,
    pub p_value: f64,
    pub statistic: f64,
}

/// Best level-subset split of a nominal node column.
pub fn best_nominal_split(
    codes: &[u32],
    dy: &DistanceMatrix,
    n_permutations: usize,
    streams: &Streams,
    min_bucket: usize,
) -> Result<NominalSplit, SplitError> {
    if codes.len() != dy.size() {
        return Err(EnergyError::SizeMismatch(codes.len(), dy.size()).into());
    }
    // first-appearance order makes the enumeration independent of the coding
    let mut present: Vec<u32> = Vec::new();
    for &c in codes {
        if !present.contains(&c) {
            present.push(c);
        }
    }
    if present.len() < 2 {
        return Err(SplitError::Constant);
    }
    if present.len() > MAX_NOMINAL_LEVELS {
        return Err(SplitError::TooManyLevels { found: present.len(), max: MAX_NOMINAL_LEVELS });
    }
    let subsets = nominal_candidates(&present);
    let indicators: Vec<Option<Vec<bool>>> = subsets
        .iter()
        .map(|s| {
            candidate_indicator(codes, |c| s.contains(c)).ok().filter(|ind| admissible(ind, min_bucket))
        })
        .collect();
    let best = test_candidates(&indicators, &Centered::new(dy), n_permutations, streams)?
        .ok_or(SplitError::NoAdmissibleSplit { min_bucket })?;
    let mut levels = subsets[best.index].clone();
    levels.sort_unstable();
    Ok(NominalSplit { levels, p_value: best.p_value, statistic: best.statistic })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSplit {
    pub component: usize,
    pub threshold: f64,
    pub p_value: f64,
    /// p-value of the component-selection test.
    pub component_p_value: f64,
}

/// Feature-vector-extraction split: choose the component most associated
/// with the response (smallest p-value, lowest index on ties, no stopping
/// rule), then split it like a numeric covariate.
///
/// Component `s` tests with substream `(COMPONENT, s)`; the threshold
/// search then uses `(SPLIT_CANDIDATE, c)` below `streams`.
pub fn fve_split(
    components: &ComponentMatrix,
    dy: &DistanceMatrix,
    n_permutations: usize,
    streams: &Streams,
    min_bucket: usize,
) -> Result<ComponentSplit, SplitError> {
    let m = components.n_rows();
    if m != dy.size() {
        return Err(EnergyError::SizeMismatch(m, dy.size()).into());
    }
    if m < 2 {
        return Err(SplitError::TooFew { needed: 2, found: m });
    }
    let by = Centered::new(dy);
    let columns: Vec<Vec<f64>> = (0..components.n_components()).map(|s| components.column(s)).collect();
    let tests = par::map_indexed(columns.len(), |s| {
        let col = &columns[s];
        if col.iter().all(|&v| v == col[0]) {
            return Ok(None);
        }
        let ax = Centered::new(&DistanceMatrix::from_reals(col));
        centered_test(&ax, &by, n_permutations, &streams.child(tag::COMPONENT, s as u64))
            .map(|(_, p)| Some(p))
    });
    let mut best: Option<(usize, f64)> = None;
    for (s, t) in tests.into_iter().enumerate() {
        if let Some(p) = t? {
            if best.is_none_or(|(_, bp)| p < bp) {
                best = Some((s, p));
            }
        }
    }
    let (component, component_p_value) = best.ok_or(SplitError::AllComponentsConstant)?;
    let split = numeric_split_centered(&columns[component], &by, n_permutations, streams, min_bucket)?;
    Ok(ComponentSplit { component, threshold: split.threshold, p_value: split.p_value, component_p_value })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PamResult {
    /// Node positions of the two medoids, lower first.
    pub medoids: [usize; 2],
    pub assignment: Vec<Side>,
    /// Sum of distances to the nearer medoid.
    pub cost: f64,
}

fn pam_cost(d: &DistanceMatrix, a: usize, b: usize) -> f64 {
    (0..d.size()).map(|k| d.get(k, a).min(d.get(k, b))).sum()
}

/// PAM with two medoids: greedy BUILD, then best-improvement SWAP until no
/// swap lowers the total cost. Ties resolve to the lowest index.
pub fn pam_two_medoids(d: &DistanceMatrix) -> Result<PamResult, SplitError> {
    let m = d.size();
    if m < 2 {
        return Err(SplitError::TooFew { needed: 2, found: m });
    }
    if d.is_zero() {
        return Err(SplitError::DegenerateDistances);
    }
    let row_sums: Vec<f64> = (0..m).map(|i| d.row(i).iter().sum()).collect();
    let first = (0..m).fold(0, |b, i| if row_sums[i] < row_sums[b] { i } else { b });
    let mut second = usize::MAX;
    let mut cost = f64::INFINITY;
    for i in (0..m).filter(|&i| i != first) {
        let c = pam_cost(d, first, i);
        if c < cost {
            (second, cost) = (i, c);
        }
    }

    let mut medoids = [first, second];
    loop {
        let mut best: Option<([usize; 2], f64)> = None;
        for slot in 0..2 {
            for h in (0..m).filter(|h| !medoids.contains(h)) {
                let mut candidate = medoids;
                candidate[slot] = h;
                let c = pam_cost(d, candidate[0], candidate[1]);
                let target = best.map_or(cost, |(_, bc)| bc);
                if c < target - 1e-12 * target.abs() {
                    best = Some((candidate, c));
                }
            }
        }
        match best {
            Some((next, c)) => (medoids, cost) = (next, c),
            None => break,
        }
    }

    medoids.sort_unstable();
    let [c1, c2] = medoids;
    let assignment = (0..m)
        .map(|k| if d.get(k, c1) <= d.get(k, c2) { Side::Left } else { Side::Right })
        .collect();
    Ok(PamResult { medoids, assignment, cost })
}

/// Renders a rule as `name <= q`, `name in {..}`, etc.
pub fn describe_rule(rule: &SplitRule, covariate_name: &str, levels: Option<&[String]>) -> String {
    use alloc::format;
    match rule {
        SplitRule::NumericThreshold { threshold, .. } => format!("{covariate_name} <= {threshold}"),
        SplitRule::NominalSubset { levels: subset, .. } => {
            let names: Vec<String> = subset
                .iter()
                .map(|&c| {
                    levels.and_then(|l| l.get(c as usize)).cloned().unwrap_or_else(|| format!("#{c}"))
                })
                .collect();
            format!("{covariate_name} in {{{}}}", names.join(", "))
        }
        SplitRule::ComponentThreshold { expansion, component, threshold, .. } => format!(
            "{covariate_name}[component {}: {}] <= {threshold}",
            component + 1,
            expansion.component_label(*component)
        ),
        SplitRule::MedoidPair { left, right, .. } => format!(
            "{covariate_name} closer to medoid row {} than to medoid row {}",
            left.row, right.row
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::Expansion;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn reals(xs: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_reals(xs)
    }

    #[test]
    fn indicator_examples() {
        assert_eq!(candidate_indicator(&[1.0, 2.0, 3.0], |&x| x <= 2.0).unwrap(), vec![true, true, false]);
        assert_eq!(candidate_indicator(&['a', 'b', 'a'], |&c| c == 'a').unwrap(), vec![true, false, true]);
        assert_eq!(candidate_indicator(&[1.0, 2.0], |&x| x <= 5.0), Err(SplitError::TrivialCandidate));
    }

    #[test]
    fn threshold_enumeration() {
        assert_eq!(numeric_thresholds(&[3.0, 1.0, 4.0, 2.0, 2.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(numeric_thresholds(&[1.0, 2.0]), vec![1.0]);
        assert!(numeric_thresholds(&[5.0, 5.0]).is_empty());
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(nominal_candidates(&[0, 1, 2]), vec![vec![0], vec![0, 1], vec![0, 2]]);
        assert_eq!(nominal_candidates(&[3, 7]), vec![vec![3]]);
        assert_eq!(nominal_candidates(&[0, 1, 2, 3, 4]).len(), 15);
    }

    #[test]
    fn numeric_split_finds_step() {
        let xs: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let y: Vec<f64> = xs.iter().map(|&x| if x > 2.0 { 1.0 } else { 0.0 }).collect();
        let s = best_numeric_split(&xs, &reals(&y), 999, &Streams::new(42), 1).unwrap();
        assert_eq!(s.threshold, 2.0);

        let y: Vec<f64> = xs.iter().map(|&x| if x > 12.0 { 1.0 } else { 0.0 }).collect();
        let s = best_numeric_split(&xs, &reals(&y), 199, &Streams::new(42), 1).unwrap();
        assert_eq!(s.threshold, 12.0);
        assert_eq!(s.p_value, 1.0 / 200.0);
    }

    #[test]
    fn numeric_split_guards() {
        let s = best_numeric_split(&[1.0, 2.0], &reals(&[0.0, 1.0]), 9, &Streams::new(1), 1).unwrap();
        assert_eq!(s.threshold, 1.0);
        assert_eq!(
            best_numeric_split(&[4.0, 4.0, 4.0], &reals(&[0.0, 1.0, 2.0]), 9, &Streams::new(1), 1),
            Err(SplitError::Constant)
        );
        assert_eq!(
            best_numeric_split(&[1.0, 2.0, 3.0], &reals(&[0.0, 1.0, 2.0]), 9, &Streams::new(1), 2),
            Err(SplitError::NoAdmissibleSplit { min_bucket: 2 })
        );
    }

    #[test]
    fn min_bucket_restricts_thresholds() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let y: Vec<f64> = xs.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
        let s = best_numeric_split(&xs, &reals(&y), 99, &Streams::new(3), 4).unwrap();
        assert!((3.0..=7.0).contains(&s.threshold));
    }

    #[test]
    fn nominal_split_finds_level_group() {
        let codes: Vec<u32> = (0..30).map(|i| i % 3).collect();
        let y: Vec<f64> = codes.iter().map(|&c| if c == 0 { 5.0 } else { 0.0 } + 0.01 * c as f64).collect();
        let s = best_nominal_split(&codes, &reals(&y), 199, &Streams::new(42), 1).unwrap();
        assert_eq!(s.levels, vec![0]);
        assert!(matches!(
            best_nominal_split(&[2, 2], &reals(&[0.0, 1.0]), 9, &Streams::new(1), 1),
            Err(SplitError::Constant)
        ));
        let many: Vec<u32> = (0..16).collect();
        assert!(matches!(
            best_nominal_split(&many, &reals(&[0.0; 16]), 9, &Streams::new(1), 1),
            Err(SplitError::TooManyLevels { found: 16, .. })
        ));
    }

    fn component_matrix(cols: &[Vec<f64>]) -> ComponentMatrix {
        let m = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..m).map(|k| cols.iter().map(|c| c[k]).collect()).collect();
        ComponentMatrix::from_rows(&rows, Expansion::ShellCounts { n_vertices: cols.len() })
    }

    #[test]
    fn fve_picks_informative_component() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let m = 40;
        let y: Vec<f64> = (0..m).map(|k| if k < m / 2 { 0.0 } else { 1.0 } + 0.1 * rng.random::<f64>()).collect();
        let mut cols: Vec<Vec<f64>> = (0..6).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
        cols[3] = y.iter().map(|v| 2.0 * v + 0.05 * rng.random::<f64>()).collect();
        let s = fve_split(&component_matrix(&cols), &reals(&y), 199, &Streams::new(42), 1).unwrap();
        assert_eq!(s.component, 3);

        let single = fve_split(&component_matrix(&cols[..1]), &reals(&y), 19, &Streams::new(1), 1).unwrap();
        assert_eq!(single.component, 0);
        let flat = vec![vec![1.0; m]; 3];
        assert_eq!(
            fve_split(&component_matrix(&flat), &reals(&y), 19, &Streams::new(1), 1),
            Err(SplitError::AllComponentsConstant)
        );
    }

    #[test]
    fn pam_separates_two_clusters() {
        let xs = [0.0, 0.1, 10.0, 10.1];
        let r = pam_two_medoids(&reals(&xs)).unwrap();
        assert_eq!(r.assignment, vec![Side::Left, Side::Left, Side::Right, Side::Right]);
        assert!(r.medoids[0] < 2 && r.medoids[1] >= 2);
        assert!((r.cost - 0.2).abs() < 1e-12);
    }

    #[test]
    fn pam_small_cases() {
        let r = pam_two_medoids(&reals(&[3.0, 5.0])).unwrap();
        assert_eq!(r.medoids, [0, 1]);
        assert_eq!(r.assignment, vec![Side::Left, Side::Right]);
        let simplex = DistanceMatrix::from_fn(3, |_, _| 1.0);
        assert_eq!(pam_two_medoids(&simplex).unwrap().medoids, [0, 1]);
        assert_eq!(pam_two_medoids(&reals(&[1.0, 1.0, 1.0])), Err(SplitError::DegenerateDistances));
        assert!(pam_two_medoids(&reals(&[1.0])).is_err());
    }

    fn brute_force_pam(d: &DistanceMatrix) -> f64 {
        let m = d.size();
        let mut best = f64::INFINITY;
        for a in 0..m {
            for b in (a + 1)..m {
                best = best.min(pam_cost(d, a, b));
            }
        }
        best
    }

    #[test]
    fn pam_is_exact_on_separated_clusters() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let m = rng.random_range(4..=10);
            let pts: Vec<(f64, f64)> = (0..m)
                .map(|k| (rng.random::<f64>() + if k % 2 == 0 { 0.0 } else { 20.0 }, rng.random()))
                .collect();
            let d = DistanceMatrix::from_fn(m, |k, l| {
                ((pts[k].0 - pts[l].0).powi(2) + (pts[k].1 - pts[l].1).powi(2)).sqrt()
            });
            let r = pam_two_medoids(&d).unwrap();
            assert!((r.cost - brute_force_pam(&d)).abs() <= 1e-12 * r.cost.max(1.0));
        }
    }

    #[test]
    fn swap_can_stop_at_a_local_minimum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let mut above = 0;
        for _ in 0..300 {
            let m = rng.random_range(2..=10);
            let pts: Vec<(f64, f64)> = (0..m).map(|_| (rng.random(), rng.random())).collect();
            let d = DistanceMatrix::from_fn(m, |k, l| {
                ((pts[k].0 - pts[l].0).powi(2) + (pts[k].1 - pts[l].1).powi(2)).sqrt()
            });
            let r = pam_two_medoids(&d).unwrap();
            let best = brute_force_pam(&d);
            assert!(r.cost >= best - 1e-12);
            if r.cost > best + 1e-12 {
                above += 1;
            }
        }
        assert!(above > 0 && above < 30, "{above}");
    }

    #[test]
    fn rule_routing() {
        let rule = SplitRule::NumericThreshold { covariate: 0, threshold: 2.0 };
        assert_eq!(apply_rule(&rule, Observation::Numeric(2.0)).unwrap(), Side::Left);
        assert_eq!(apply_rule(&rule, Observation::Numeric(2.5)).unwrap(), Side::Right);
        assert_eq!(apply_rule(&rule, Observation::Nominal(0)), Err(SplitError::TypeMismatch));

        let rule = SplitRule::NominalSubset { covariate: 0, levels: vec![0] };
        assert_eq!(apply_rule(&rule, Observation::Nominal(1)).unwrap(), Side::Right);

        let grid = [0.0, 1.0];
        let rule = SplitRule::MedoidPair {
            covariate: 0,
            left: Medoid { row: 0, value: MedoidValue::Functional { values: vec![0.0, 0.0], grid: grid.to_vec() } },
            right: Medoid { row: 1, value: MedoidValue::Functional { values: vec![2.0, 2.0], grid: grid.to_vec() } },
            distance: DistanceKind::L2,
        };
        let mid = [1.0, 1.0];
        assert_eq!(apply_rule(&rule, Observation::Functional { values: &mid, grid: &grid }).unwrap(), Side::Left);
        let near = [1.5, 1.5];
        assert_eq!(apply_rule(&rule, Observation::Functional { values: &near, grid: &grid }).unwrap(), Side::Right);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pam_swap_objective_is_a_local_minimum(pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..14)) {
            let m = pts.len();
            let d = DistanceMatrix::from_fn(m, |k, l| ((pts[k].0 - pts[l].0).powi(2) + (pts[k].1 - pts[l].1).powi(2)).sqrt());
            let r = pam_two_medoids(&d).unwrap();
            prop_assert!((r.cost - pam_cost(&d, r.medoids[0], r.medoids[1])).abs() < 1e-12);
            for h in 0..m {
                for slot in 0..2 {
                    let mut c = r.medoids;
                    if c.contains(&h) { continue; }
                    c[slot] = h;
                    prop_assert!(pam_cost(&d, c[0], c[1]) >= r.cost - 1e-9);
                }
            }
        }

        #[test]
        fn monotone_transform_keeps_partition(xs in proptest::collection::vec(-3.0f64..3.0, 6..20), seed in 0u64..500) {
            let y: Vec<f64> = xs.iter().map(|x| (x * 1.7).sin()).collect();
            let dy = reals(&y);
            let s = Streams::new(seed);
            prop_assume!(!numeric_thresholds(&xs).is_empty());
            let a = best_numeric_split(&xs, &dy, 29, &s, 1).unwrap();
            let t: Vec<f64> = xs.iter().map(|x| x.exp() + 5.0).collect();
            let b = best_numeric_split(&t, &dy, 29, &s, 1).unwrap();
            let pa: Vec<bool> = xs.iter().map(|&x| x <= a.threshold).collect();
            let pb: Vec<bool> = t.iter().map(|&x| x <= b.threshold).collect();
            prop_assert_eq!(pa, pb);
        }

        #[test]
        fn nominal_relabeling_keeps_partition_and_p_value(codes in proptest::collection::vec(0u32..4, 8..24), seed in 0u64..500) {
            let mut present = codes.clone();
            present.sort();
            present.dedup();
            prop_assume!(present.len() >= 2);
            let y: Vec<f64> = codes.iter().enumerate().map(|(i, &c)| c as f64 * 0.7 + (i as f64 * 0.37).sin()).collect();
            let dy = reals(&y);
            let s = Streams::new(seed);
            let a = best_nominal_split(&codes, &dy, 29, &s, 1).unwrap();
            let relabel = |c: u32| [5, 1, 7, 3][c as usize];
            let codes2: Vec<u32> = codes.iter().map(|&c| relabel(c)).collect();
            let b = best_nominal_split(&codes2, &dy, 29, &s, 1).unwrap();
            let left_a: Vec<bool> = codes.iter().map(|c| a.levels.contains(c)).collect();
            let left_b: Vec<bool> = codes2.iter().map(|c| b.levels.contains(c)).collect();
            prop_assert_eq!(left_a, left_b);
            prop_assert_eq!(a.p_value, b.p_value);
        }
    }
}
