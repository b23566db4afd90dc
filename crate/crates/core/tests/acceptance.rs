//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured quantities. Exits nonzero if any criterion fails.

use lrperc::cluster::components;
use lrperc::coupling::{derive_seed, CouplingField};
use lrperc::estimators::{
    betac_bracket, boundary_connection_prob, connection_prob_within, exact_connect_oracle, exact_connection_prob,
    locality_sweep, phi_value, BetaBracket, BracketSettings, Criterion, PhiMode,
};
use lrperc::lattice::{LatticeBox, Point, VertexSet};
use lrperc::metric::{max_cluster_distance, mu_sequence, shape_replicate, bfs_distances};
use lrperc::renorm::{
    calibrate_scales, depth_no_pad_probe, directed_survival, directed_survival_exact, exploration_survival,
    DepthParams, DirectedModel, ExplorationParams,
};
use lrperc::sampler::{sample_box, EdgeModel, SamplePlan, DEFAULT_MISS_BUDGET};
use lrperc::stats::{mean_and_stderr, sample_sd};
use lrperc::walk::transience_probe;
use lrperc::{cli, union_field, Kernel};
use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

type Outcome = (bool, String);
type Check<'a> = (usize, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn pl(d: usize, s: f64) -> Kernel {
    Kernel::power_law(d, 1.0, s).unwrap()
}

fn joint(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Brackets shared by several criteria, computed once.
struct Regimes {
    pl5_d2: BetaBracket,
    pl7_d3: BetaBracket,
}

impl Regimes {
    fn new() -> Regimes {
        let s2 = BracketSettings::new(vec![16, 32, 64], Criterion::BoundaryCrossingHalf, 0.05, 200, 101);
        let s3 = BracketSettings::new(vec![6, 10, 16], Criterion::BoundaryCrossingHalf, 0.05, 200, 103);
        Regimes { pl5_d2: betac_bracket(&pl(2, 5.0), &s2).unwrap(), pl7_d3: betac_bracket(&pl(3, 7.0), &s3).unwrap() }
    }
}

fn c1_edge_law() -> Outcome {
    let k = pl(2, 5.0);
    let beta = 1.0;
    let g = LatticeBox::centered(2, 8).unwrap();
    let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), beta).unwrap(), g, DEFAULT_MISS_BUDGET).unwrap();
    let pts: Vec<Point> = g.points().collect();
    let mut instances: BTreeMap<Point, u64> = BTreeMap::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            *instances.entry((pts[j] - pts[i]).canonical_class(2)).or_default() += 1;
        }
    }
    let reps = 10_000u64;
    let counts = (0..reps)
        .map(|r| {
            let c = plan.sample(CouplingField::new(derive_seed(1, r), 0));
            let mut m: BTreeMap<Point, u64> = BTreeMap::new();
            for &(a, b) in c.edges() {
                *m.entry((c.point(b as usize) - c.point(a as usize)).canonical_class(2)).or_default() += 1;
            }
            m
        })
        .fold(BTreeMap::<Point, u64>::new(), |mut acc, m| {
            for (k, v) in m {
                *acc.entry(k).or_default() += v;
            }
            acc
        });
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (class, &n) in &instances {
        let p = k.open_probability(beta, class).unwrap();
        if p < 1e-4 {
            continue;
        }
        checked += 1;
        let trials = n * reps;
        let freq = *counts.get(class).unwrap_or(&0) as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let z = (freq - p).abs() / sigma;
        worst = worst.max(z);
        if z > 4.0 {
            failures.push(format!("{class:?}: {freq} vs {p}"));
        }
    }
    (failures.is_empty(), format!("{checked} classes, max |z| = {worst:.2}, failures {failures:?}"))
}

fn c2_sprinkling() -> Outcome {
    let nn = Kernel::nearest_neighbor(1, 1.0).unwrap();
    let (a, b) = (Point::new(&[0]), Point::new(&[1]));
    let trials = 100_000u64;
    let hits = (0..trials)
        .filter(|&t| {
            let s = derive_seed(2, t);
            union_field(&a, &b, &nn, CouplingField::new(s, 1), LN_2, CouplingField::new(s, 2), LN_2).unwrap()
        })
        .count();
    let freq = hits as f64 / trials as f64;
    let sigma = (0.75f64 * 0.25 / trials as f64).sqrt();
    let law_ok = (freq - 0.75).abs() <= 4.0 * sigma;
    let k = pl(2, 4.0);
    let g = LatticeBox::centered(2, 8).unwrap();
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0];
    let mut nested = true;
    for seed in 0..20 {
        let mut prev: Option<Vec<(u32, u32)>> = None;
        for &beta in &grid {
            let c = sample_box(&k, beta, &g, CouplingField::new(seed, 0), DEFAULT_MISS_BUDGET).unwrap();
            let edges = c.edges().to_vec();
            if let Some(p) = &prev {
                nested &= p.iter().all(|e| edges.binary_search(e).is_ok());
            }
            prev = Some(edges);
        }
    }
    (
        law_ok && nested,
        format!("union frequency {freq:.5} (target 0.75, 4σ = {:.5}); nesting over 20 seeds × 5 β: {nested}", 4.0 * sigma),
    )
}

fn c3_oracle_sweep() -> Outcome {
    let patch: Vec<Point> = LatticeBox::centered(2, 1).unwrap().points().collect();
    let kernels = [
        Kernel::nearest_neighbor(2, 1.0).unwrap(),
        pl(2, 4.0),
        Kernel::perturbed_nn(pl(2, 3.0).truncate(2.0).unwrap(), 1.0).unwrap(),
    ];
    let betas = [0.1, 0.5, 1.0];
    let reps = 2000;
    let mut comparisons = 0;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for mask in 1u32..(1 << 9) {
        let size = mask.count_ones();
        if !(2..=5).contains(&size) {
            continue;
        }
        let set: Vec<Point> = (0..9).filter(|i| mask >> i & 1 == 1).map(|i| patch[i]).collect();
        let (x, y) = (set[0], set[set.len() - 1]);
        for (ki, k) in kernels.iter().enumerate() {
            for &beta in &betas {
                let exact = exact_connect_oracle(k, beta, &set, &x, &y).unwrap();
                let model = EdgeModel::beta_j(k.clone(), beta).unwrap();
                let seed = derive_seed(3, (mask as u64) << 8 | (ki as u64) << 4 | (beta * 10.0) as u64);
                let est = connection_prob_within(&model, &set, &x, &[y], reps, seed).unwrap();
                comparisons += 1;
                let sigma = est.stderr.max(est.null_stderr(exact));
                if sigma > 0.0 {
                    worst = worst.max((est.value - exact).abs() / sigma);
                }
                if !est.agrees_with(exact, 4.0) {
                    failures.push(format!("mask {mask:#x} k{ki} β{beta}: {} vs {exact}", est.value));
                }
            }
        }
    }
    let nn = Kernel::nearest_neighbor(2, 1.0).unwrap();
    let plus: Vec<Point> = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)].iter().map(|&(a, b)| Point::new(&[a, b])).collect();
    for &beta in &betas {
        let model = EdgeModel::beta_j(nn.clone(), beta).unwrap();
        let exact = exact_connection_prob(&model, &plus, &plus[0], &plus[1..]).unwrap();
        let est = boundary_connection_prob(&nn, beta, 1, reps, derive_seed(4, (beta * 10.0) as u64)).unwrap();
        comparisons += 1;
        if !est.agrees_with(exact, 4.0) {
            failures.push(format!("boundary β{beta}: {} vs {exact}", est.value));
        }
    }
    (failures.is_empty(), format!("{comparisons} comparisons, max |z| = {worst:.2}, failures {failures:?}"))
}

/// `Σ_{|y|_∞ ≤ L, y ≠ 0} (1 − e^{−βJ(y)})` by brute force.
fn direct_sum(k: &Kernel, beta: f64, l: i64, from: &Point, exclude: &[Point]) -> f64 {
    let d = k.dim();
    let g = LatticeBox::ball(d, *from, l).unwrap();
    let mut terms: Vec<f64> = g
        .points()
        .filter(|y| y != from && !exclude.contains(y))
        .map(|y| -(-beta * k.eval(&(y - *from)).unwrap()).exp_m1())
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn c4_phi() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    // S = {0}: direct sums with the neglected tails below 1e-10
    for (k, beta, l) in [(pl(1, 3.0), 0.5, 1_000_000i64), (pl(2, 5.0), 0.5, 2_500)] {
        let phi = phi_value(&k, beta, &[Point::ORIGIN], PhiMode::Exact).unwrap();
        let want = direct_sum(&k, beta, l, &Point::ORIGIN, &[]);
        let diff = (phi.value - want).abs();
        ok &= diff <= 1e-9;
        lines.push(format!("S={{0}} d={}: |Δ| = {diff:.2e}", k.dim()));
    }
    let k = pl(1, 3.0);
    let beta = 0.05;
    let s: Vec<Point> = [-1, 0, 1].iter().map(|&x| Point::new(&[x])).collect();
    let p = |x: i64| -(-beta * (x.abs() as f64).powi(-3)).exp_m1();
    // three internal edges: {-1,0}, {0,1}, {-1,1}
    let (p1, p2) = (p(1), p(2));
    let mut conn = BTreeMap::new();
    for state in 0..8u32 {
        let (a, b, c) = (state & 1 == 1, state & 2 == 2, state & 4 == 4);
        let w = [(a, p1), (b, p1), (c, p2)].iter().map(|&(o, q)| if o { q } else { 1.0 - q }).product::<f64>();
        let to_left = a || (b && c);
        let to_right = b || (a && c);
        *conn.entry(-1).or_insert(0.0) += if to_left { w } else { 0.0 };
        *conn.entry(1).or_insert(0.0) += if to_right { w } else { 0.0 };
    }
    conn.insert(0, 1.0);
    let mut want = 0.0;
    for x in [-1i64, 0, 1] {
        want += conn[&x] * direct_sum(&k, beta, 1_000_000, &Point::new(&[x]), &s);
    }
    let phi = phi_value(&k, beta, &s, PhiMode::Exact).unwrap();
    let diff = (phi.value - want).abs();
    ok &= diff <= 1e-9;
    lines.push(format!("S={{-1,0,1}}: φ = {:.12}, |Δ| = {diff:.2e}", phi.value));
    (ok, lines.join("; "))
}

fn c5_betac_nn() -> Outcome {
    let k = Kernel::nearest_neighbor(2, 1.0).unwrap();
    let s = BracketSettings::new(vec![32, 64, 128], Criterion::BoundaryCrossingHalf, 0.05, 400, 5);
    let b = betac_bracket(&k, &s).unwrap();
    let at_ln2 = boundary_connection_prob(&k, LN_2, 128, 400, 55).unwrap();
    let ok = b.low <= LN_2 && LN_2 <= b.high && b.low >= 0.25 - 1e-12;
    (
        ok,
        format!(
            "bracket [{:.4}, {:.4}] (ln 2 = {LN_2:.4}), GW bound {:.4}; P(0 ↔ ∂B_128) at ln 2 = {:.3} ± {:.3}",
            b.low, b.high, b.lower_bound, at_ln2.value, at_ln2.stderr
        ),
    )
}

fn c6_locality() -> Outcome {
    let k = pl(2, 4.0);
    let s = BracketSettings::new(vec![16, 32, 64], Criterion::BoundaryCrossingHalf, 0.05, 200, 6);
    let rows = locality_sweep(&k, &[2.0, 4.0, 8.0, 16.0], &s).unwrap();
    let mids: Vec<(f64, f64)> = rows.iter().map(|r| (r.bracket.midpoint, r.bracket.stderr)).collect();
    let monotone = mids.windows(2).all(|w| w[1].0 <= w[0].0 + 2.0 * joint(w[0].1, w[1].1));
    let inf = mids[4].0;
    let closer = mids[3].0 - inf < mids[0].0 - inf;
    let bar = betac_bracket(&Kernel::perturbed_nn(k.clone(), 1.0).unwrap(), &s).unwrap();
    let strict = mids[4].0 - bar.midpoint > 2.0 * joint(mids[4].1, bar.stderr);
    let shown: Vec<String> = mids.iter().map(|(m, e)| format!("{m:.4}±{e:.4}")).collect();
    (
        monotone && closer && strict,
        format!(
            "midpoints N=2,4,8,16,∞: {shown:?}; nonincreasing {monotone}; N=16 closer than N=2 {closer}; J̄ midpoint {:.4}±{:.4} below J: {strict}",
            bar.midpoint, bar.stderr
        ),
    )
}

fn giant(k: &Kernel, beta: f64, n: i64, reps: usize, seed: u64) -> Vec<f64> {
    cli::giant_densities(k, beta, n, reps, seed, DEFAULT_MISS_BUDGET).unwrap()
}

fn c7_giant(reg: &Regimes) -> Outcome {
    let k = pl(2, 5.0);
    let beta = 2.0 * reg.pl5_d2.high;
    let reference = giant(&k, beta, 256, 40, 70);
    let (theta, _) = mean_and_stderr(&reference);
    let mut ok = true;
    let mut sds = Vec::new();
    let mut lines = Vec::new();
    for n in [64, 128] {
        let xs = giant(&k, beta, n, 60, 71);
        let (m, _) = mean_and_stderr(&xs);
        let sd = sample_sd(&xs, m);
        ok &= (m - theta).abs() < 0.05;
        sds.push(sd);
        lines.push(format!("n={n}: mean {m:.4}, sd {sd:.4}"));
    }
    ok &= sds[1] < sds[0];
    (ok, format!("β = {beta:.4}, θ proxy (n=256) {theta:.4}; {}", lines.join("; ")))
}

fn c8_distance_shape(reg: &Regimes) -> Outcome {
    let k = pl(2, 5.0);
    let beta = 2.0 * reg.pl5_d2.high;
    let rows = mu_sequence(&k, beta, &Point::unit(0), &[16, 32, 64], 20, 80, DEFAULT_MISS_BUDGET).unwrap();
    let positive = rows.iter().all(|r| r.used > 0 && r.replicates.iter().all(|x| x.d_0_n > 0));
    let violations: usize = rows.iter().map(|r| r.subadditivity_violations).sum();
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    let spread = (means.iter().cloned().fold(f64::MIN, f64::max) - means.iter().cloned().fold(f64::MAX, f64::min)) / avg;
    let mu = cli::estimate_mu_table(&k, beta, 32, 20, 81, DEFAULT_MISS_BUDGET).unwrap();
    let pairs = 20u64;
    let mut better = 0;
    for r in 0..pairs {
        let seed = derive_seed(82, r);
        let a = shape_replicate(&k, beta, &mu, 32, 0.25, seed, DEFAULT_MISS_BUDGET).unwrap();
        let b = shape_replicate(&k, beta, &mu, 64, 0.25, seed, DEFAULT_MISS_BUDGET).unwrap();
        if b.magnitude <= a.magnitude {
            better += 1;
        }
    }
    let frac = better as f64 / pairs as f64;
    let ok = positive && violations == 0 && spread < 0.15 && frac >= 0.8;
    (
        ok,
        format!(
            "ratios {:?}, all positive {positive}, subadditivity violations {violations}, relative spread {spread:.3}; shape magnitude(64) ≤ magnitude(32) in {better}/{pairs}",
            means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn c9_distance_tails(reg: &Regimes) -> Outcome {
    let k = pl(2, 5.0);
    let beta = 2.0 * reg.pl5_d2.high;
    let mut freqs = Vec::new();
    for n in [16i64, 32, 64] {
        let g = LatticeBox::centered(2, n).unwrap();
        let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), beta).unwrap(), g, DEFAULT_MISS_BUDGET).unwrap();
        let reps = 40u64;
        let hits = (0..reps)
            .filter(|&r| {
                let c = plan.sample(CouplingField::new(derive_seed(90, r), 0));
                let forest = components(&c);
                let (_, root) = forest.largest();
                let set = VertexSet::from_indices(c.num_vertices(), forest.members(root));
                max_cluster_distance(&c, &set).0 as i64 > 8 * n
            })
            .count();
        freqs.push(hits as f64 / reps as f64);
    }
    let decreasing = freqs.windows(2).all(|w| w[1] <= w[0]);
    let n = 4096i64;
    let inner = (n as f64).powf(1.0 / 16.0).floor() as i64;
    let g = LatticeBox::centered(2, 256).unwrap();
    let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), beta).unwrap(), g, DEFAULT_MISS_BUDGET).unwrap();
    let reps = 40u64;
    let core: Vec<Point> = LatticeBox::centered(2, inner).unwrap().points().collect();
    let tail_hits = (0..reps)
        .filter(|&r| {
            let c = plan.sample(CouplingField::new(derive_seed(91, r), 0));
            core.iter().any(|x| {
                let f = bfs_distances(&c, &[c.index(x).unwrap()]).unwrap();
                core.iter().any(|y| f.get(c.index(y).unwrap()).is_some_and(|d| d as i64 > n))
            })
        })
        .count();
    let tail = tail_hits as f64 / reps as f64;
    (
        decreasing && tail <= 0.05,
        format!(
            "P(max D > 8n) at n=16,32,64: {freqs:?} (nonincreasing {decreasing}); P(∃x,y ∈ B_{inner}: {n} < D < ∞) = {tail} in a radius-256 box"
        ),
    )
}

fn c10_transience(reg: &Regimes) -> Outcome {
    let b3 = 2.0 * reg.pl7_d3.high;
    let b2 = 2.0 * reg.pl5_d2.high;
    let p3 = transience_probe(&pl(3, 7.0), b3, &[16, 32], 10_000, 200, 8, 100, DEFAULT_MISS_BUDGET).unwrap();
    let p2 = transience_probe(&pl(2, 5.0), b2, &[16, 32], 10_000, 200, 8, 101, DEFAULT_MISS_BUDGET).unwrap();
    let (r3, r2) = (p3.ratio(0, 1), p2.ratio(0, 1));
    let gap = p2.returns.value - p3.returns.value;
    let sep = gap > 4.0 * joint(p2.returns.stderr, p3.returns.stderr);
    (
        r3 < 1.2 && r2 > 1.2 && sep,
        format!(
            "d=3 (β={b3:.3}): R(32)/R(16) = {r3:.3}, return {:.3}±{:.3}; d=2 (β={b2:.3}): R(32)/R(16) = {r2:.3}, return {:.3}±{:.3}",
            p3.returns.value, p3.returns.stderr, p2.returns.value, p2.returns.stderr
        ),
    )
}

fn c11_renorm() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for rho in [0.6, 0.9, 0.99] {
        let m = DirectedModel::uniform(rho).unwrap().with_width(6);
        let exact = directed_survival_exact(&m, 30).unwrap();
        let est = directed_survival(&m, 30, 20_000, derive_seed(110, (rho * 100.0) as u64));
        let agree = est.agrees_with(exact, 4.0);
        ok &= agree;
        lines.push(format!("ρ={rho}: {:.4} vs exact {exact:.4}", est.value));
    }
    let k = pl(2, 4.0);
    let s = BracketSettings::new(vec![16, 32, 64], Criterion::BoundaryCrossingHalf, 0.05, 200, 111);
    let b = betac_bracket(&k, &s).unwrap();
    let beta = 3.0 * b.midpoint;
    let candidates = [(4, 1), (6, 1), (8, 2), (12, 3)];
    let Some(((n, m), pad)) = calibrate_scales(&k, beta, 1.0, &candidates, 0.98, 200, 112).unwrap() else {
        return (false, format!("{}; no (n, m) candidate reached pad probability 0.98", lines.join(", ")));
    };
    let params = ExplorationParams::new(beta, n, m, 2 * n, 20).unwrap();
    let run = exploration_survival(&k, &params, 100, 113).unwrap();
    let zero = exploration_survival(&k, &ExplorationParams::new(0.0, n, m, 2 * n, 20).unwrap(), 20, 114).unwrap();
    let survive = run.survival.value > 0.5;
    let certs = run.certificates_verified == run.certificates_checked;
    ok &= survive && zero.survival.value == 0.0 && certs;
    (
        ok,
        format!(
            "{}; β = 3×{:.4}, calibrated (n, m) = ({n}, {m}) with annulus-pad probability {:.3}; survival to depth 20: {:.2} (mean depth {:.2}); β=0 survival {}; certificates {}/{} verified (edges ≤ 14n)",
            lines.join(", "),
            b.midpoint,
            pad.value,
            run.survival.value,
            run.mean_depth,
            zero.survival.value,
            run.certificates_verified,
            run.certificates_checked
        ),
    )
}

fn c12_depth_pad(reg: &Regimes) -> Outcome {
    let k = pl(2, 5.0);
    let beta = 2.0 * reg.pl5_d2.high;
    let mut est = Vec::new();
    for kv in [16usize, 64, 256] {
        let p = depth_no_pad_probe(&k, beta, &DepthParams { r: None, truncation: 2, k: kv, box_radius: None }, 400, 120)
            .unwrap();
        est.push((p.estimate.value, p.estimate.stderr, p.block_side, p.mean_blocks));
    }
    let strict = est.windows(2).all(|w| w[1].0 < w[0].0);
    let shown: Vec<String> =
        est.iter().map(|(v, e, kk, nb)| format!("{v:.4}±{e:.4} (K={kk}, {nb:.1} blocks)")).collect();
    (strict, format!("P(L_k) at k=16,64,256: {shown:?}"))
}

const REPRO_CONFIGS: &[(&str, &str)] = &[
    ("sample", "[model]\ndim = 2\nkernel = power_law(C=1,s=4)\nbeta = 1\n[geometry]\nradius = 6\n"),
    ("theta", "replicates = 8\n[model]\ndim = 2\nkernel = power_law(C=1,s=5)\nbetas = 0.5,1\n[geometry]\nradii = 4,8\n"),
    ("betac", "replicates = 16\n[model]\ndim = 2\nkernel = nn(w=1)\n[geometry]\nradii = 4,6,8\n[estimator]\ntol = 0.1\n"),
    ("locality", "replicates = 16\n[model]\ndim = 2\nkernel = power_law(C=1,s=4)\n[geometry]\nradii = 4,6,8\n[estimator]\ntruncations = 2,4\ntol = 0.1\n"),
    ("phi", "[model]\ndim = 1\nkernel = power_law(C=1,s=3)\nbetas = 0.05,0.1\n[estimator]\nset = -1;0;1\n"),
    ("distance", "replicates = 4\n[model]\ndim = 2\nkernel = power_law(C=1,s=5)\nbeta = 1\n[geometry]\nn_values = 2,4\n"),
    ("shape", "replicates = 3\n[model]\ndim = 2\nkernel = power_law(C=1,s=5)\nbeta = 1\n[geometry]\nt_values = 4,8\n[estimator]\nmu_n = 4\n"),
    ("giant", "replicates = 4\n[model]\ndim = 2\nkernel = power_law(C=1,s=5)\nbeta = 1\n[geometry]\nradii = 4,8\n"),
    ("walk", "replicates = 3\n[model]\ndim = 2\nkernel = power_law(C=1,s=5)\nbeta = 1.5\n[geometry]\nradii = 3,6\n[estimator]\nhorizon = 200\nwalks = 20\n"),
    ("renorm", "replicates = 3\n[model]\ndim = 2\nkernel = power_law(C=1,s=4)\nbeta = 1.5\n[geometry]\nn = 2\nm = 0\ndepth = 3\n[estimator]\ncutoff = 4\n"),
    ("dsb", "replicates = 200\n[model]\ndim = 2\nkernel = nn(w=1)\n[geometry]\ndepth = 10\nwidth = 3\n[estimator]\nrho = 0.6,0.9\n"),
    ("depthpad", "replicates = 10\n[model]\ndim = 2\nkernel = power_law(C=1,s=5)\nbeta = 1\n[estimator]\nk_values = 4,8\ncutoff = 2\n"),
    ("counterexample1d", "replicates = 16\n[model]\ndim = 1\nkind = pf\nshort_edge = pf(p=0.5,f=power(gamma=0.5,s=3))\n[geometry]\nradii = 8,16,32\nn_values = 2,4\n[estimator]\ntol = 0.1\n"),
];

fn run_cli(bin: &Path, config: &Path, out: &Path, workers: usize) -> Result<(Vec<u8>, Vec<u8>), String> {
    let status = Command::new(bin)
        .args(["--config", config.to_str().unwrap(), "--seed", "13", "--workers", &workers.to_string(), "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let stem = config.file_stem().unwrap().to_str().unwrap();
    let read = |ext: &str| std::fs::read(out.join(format!("{stem}.{ext}"))).map_err(|e| e.to_string());
    Ok((read("csv")?, read("json")?))
}

fn c13_reproducibility() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_lrperc"));
    let dir = tempfile::tempdir().unwrap();
    let mut bad = Vec::new();
    for (name, body) in REPRO_CONFIGS {
        let cfg = dir.path().join(format!("{name}.cfg"));
        std::fs::write(&cfg, format!("experiment = {name}\n{body}")).unwrap();
        let runs: Vec<_> = [(1usize, "a"), (1, "b"), (4, "c")]
            .iter()
            .map(|(w, tag)| run_cli(bin, &cfg, &dir.path().join(tag), *w))
            .collect();
        match (&runs[0], &runs[1], &runs[2]) {
            (Ok(a), Ok(b), Ok(c)) if a == b && a == c => {}
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => bad.push(format!("{name}: {e}")),
            _ => bad.push(format!("{name}: outputs differ")),
        }
    }
    (
        bad.is_empty(),
        format!("{} experiments rerun twice with 1 worker and once with 4; mismatches {bad:?}", REPRO_CONFIGS.len()),
    )
}

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |i: usize| filter.is_empty() || filter.contains(&i);
    let needs_regimes = [7, 8, 9, 10, 12].iter().any(|&i| wanted(i));
    let start = Instant::now();
    let regimes = needs_regimes.then(Regimes::new);
    if let Some(r) = &regimes {
        println!(
            "regimes: power_law(1,5) d=2 bracket [{:.4}, {:.4}]; power_law(1,7) d=3 bracket [{:.4}, {:.4}] ({:.0?})",
            r.pl5_d2.low,
            r.pl5_d2.high,
            r.pl7_d3.low,
            r.pl7_d3.high,
            start.elapsed()
        );
    }
    let reg = || regimes.as_ref().expect("regimes computed");
    let criteria: Vec<Check> = vec![
        (1, "edge-law correctness", Box::new(c1_edge_law)),
        (2, "sprinkling law and nesting", Box::new(c2_sprinkling)),
        (3, "oracle equivalence", Box::new(c3_oracle_sweep)),
        (4, "phi certificate", Box::new(c4_phi)),
        (5, "beta_c sanity (planar bond)", Box::new(c5_betac_nn)),
        (6, "locality and resilience trend", Box::new(c6_locality)),
        (7, "giant cluster", Box::new(|| c7_giant(reg()))),
        (8, "chemical distance and shape", Box::new(|| c8_distance_shape(reg()))),
        (9, "distance-tail probes", Box::new(|| c9_distance_tails(reg()))),
        (10, "transience contrast", Box::new(|| c10_transience(reg()))),
        (11, "renormalization machinery", Box::new(c11_renorm)),
        (12, "depth-pad decay", Box::new(|| c12_depth_pad(reg()))),
        (13, "reproducibility", Box::new(c13_reproducibility)),
    ];
    let mut failed = 0;
    for (i, name, f) in &criteria {
        if !wanted(*i) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = f();
        failed += usize::from(!ok);
        println!("criterion {i:>2} [{}] {name}: {detail} ({:.1?})", if ok { "PASS" } else { "FAIL" }, t.elapsed());
    }
    println!("acceptance: {failed} failing criteria ({:.1?} total)", start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
