//! Connection probabilities, θ proxies, critical-point brackets and the
//! `φ_{β,J}(S)` statistic.
//!
//! Brackets use common random numbers. Each replicate is sampled once at the
//! top of the searched range and every open edge keeps its coupling uniform
//! `U_e`, so the parameter value at which the edge opens is known exactly:
//! `β_e = −ln(1 − U_e)/J(e)` in the `βJ` model and `p_e = U_e` for unit edges
//! of the `(p, f)` model. A replicate's criterion event then has a single
//! activation threshold and the criterion statistic is monotone in the
//! parameter for every seed.

use crate::cluster::{components, restricted_cluster, UnionFind};
use crate::coupling::{derive_seed, CouplingField};
use crate::error::{Error, Result};
use crate::kernel::sums::{for_each_class, Accumulator};
use crate::kernel::{Kernel, ShortEdgeFunction};
use crate::lattice::{LatticeBox, Point, VertexSet, MAX_DIM};
use crate::sampler::{BoxConfig, EdgeModel, SamplePlan, DEFAULT_MISS_BUDGET, EXHAUSTIVE_BUDGET};
use crate::stats::{median, Estimate};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const ORACLE_MAX_VERTICES: usize = 6;

/// Smallest box containing all points.
fn bounding_box(dim: usize, pts: &[Point]) -> Result<LatticeBox> {
    let mut lo = [i64::MAX; MAX_DIM];
    let mut hi = [i64::MIN; MAX_DIM];
    for p in pts {
        p.check_dim(dim)?;
        for i in 0..dim {
            lo[i] = lo[i].min(p.0[i]);
            hi[i] = hi[i].max(p.0[i]);
        }
    }
    for i in dim..MAX_DIM {
        lo[i] = 0;
        hi[i] = 0;
    }
    LatticeBox::new(dim, Point(lo), Point(hi))
}

fn dedup_points(pts: &[Point]) -> Vec<Point> {
    let mut v = pts.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Exact `P(x ↔ T within V)` by enumerating all `2^|E|` edge states of `V`.
pub fn exact_connection_prob(model: &EdgeModel, vertices: &[Point], x: &Point, targets: &[Point]) -> Result<f64> {
    let verts = dedup_points(vertices);
    if verts.len() > ORACLE_MAX_VERTICES {
        return Err(Error::TooLarge(format!("{} vertices (at most {ORACLE_MAX_VERTICES})", verts.len())));
    }
    let pos = |p: &Point| verts.iter().position(|q| q == p);
    let xi = pos(x).ok_or(Error::SourceOutsideSet)?;
    let mut tmask = 0u32;
    for t in targets {
        tmask |= 1 << pos(t).ok_or(Error::SourceOutsideSet)?;
    }
    if tmask == 0 {
        return Err(Error::EmptySet);
    }
    if tmask >> xi & 1 == 1 {
        return Ok(1.0);
    }
    let mut edges = Vec::new();
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            let p = model.probability(&(verts[j] - verts[i]))?;
            if p > 0.0 {
                edges.push((i, j, p));
            }
        }
    }
    let mut total = Accumulator::default();
    for mask in 0u32..(1 << edges.len()) {
        let mut w = 1.0;
        let mut reach = 1u32 << xi;
        for (b, &(_, _, p)) in edges.iter().enumerate() {
            w *= if mask >> b & 1 == 1 { p } else { 1.0 - p };
        }
        if w == 0.0 {
            continue;
        }
        loop {
            let before = reach;
            for (b, &(i, j, _)) in edges.iter().enumerate() {
                if mask >> b & 1 == 1 && (reach >> i & 1 == 1 || reach >> j & 1 == 1) {
                    reach |= 1 << i | 1 << j;
                }
            }
            if reach == before {
                break;
            }
        }
        if reach & tmask != 0 {
            total.add(w);
        }
    }
    Ok(total.value())
}

/// Exact `P(x ↔ y within V)` in the `βJ` model for `|V| ≤ 6`.
pub fn exact_connect_oracle(k: &Kernel, beta: f64, vertices: &[Point], x: &Point, y: &Point) -> Result<f64> {
    exact_connection_prob(&EdgeModel::beta_j(k.clone(), beta)?, vertices, x, std::slice::from_ref(y))
}

/// Monte Carlo `P(x ↔ T within V)`; every edge of `V` is sampled.
pub fn connection_prob_within(
    model: &EdgeModel,
    vertices: &[Point],
    x: &Point,
    targets: &[Point],
    replicates: usize,
    seed: u64,
) -> Result<Estimate> {
    let verts = dedup_points(vertices);
    if verts.is_empty() {
        return Err(Error::EmptySet);
    }
    let g = bounding_box(model.dim(), &verts)?;
    if !verts.contains(x) || targets.iter().any(|t| !verts.contains(t)) {
        return Err(Error::SourceOutsideSet);
    }
    let plan = SamplePlan::new(model.clone(), g, EXHAUSTIVE_BUDGET)?;
    let region = VertexSet::from_indices(g.volume(), verts.iter().map(|p| g.index_of(p).expect("inside")));
    let xi = g.index_of(x).expect("inside");
    let tset: Vec<usize> = targets.iter().map(|t| g.index_of(t).expect("inside")).collect();
    let hits: Vec<bool> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = plan.sample(CouplingField::new(derive_seed(seed, r), 0));
            let cl = restricted_cluster(&cfg, xi, &region).expect("source in region");
            tset.iter().any(|t| cl.binary_search(t).is_ok())
        })
        .collect();
    Ok(Estimate::from_indicators(&hits, seed, "mc_within"))
}

/// Whether the open cluster of the box centre reaches the box boundary.
pub fn origin_hits_boundary(cfg: &BoxConfig) -> bool {
    let g = cfg.geometry();
    let Some((c, _)) = g.as_ball() else { return false };
    let Some(o) = g.index_of(&c) else { return false };
    let all = VertexSet::full(cfg.num_vertices());
    restricted_cluster(cfg, o, &all)
        .expect("origin inside")
        .iter()
        .any(|&v| g.on_boundary(&cfg.point(v)))
}

/// `|K_max| / |B|` for one configuration.
pub fn largest_density(cfg: &BoxConfig) -> f64 {
    components(cfg).largest().0 as f64 / cfg.num_vertices() as f64
}

fn replicate_configs<T: Send>(
    model: EdgeModel,
    n: i64,
    replicates: usize,
    seed: u64,
    f: impl Fn(&BoxConfig) -> T + Sync,
) -> Result<Vec<T>> {
    if n < 1 {
        return Err(Error::InvalidParameter(format!("radius must be at least 1, got {n}")));
    }
    let g = LatticeBox::centered(model.dim(), n)?;
    let plan = SamplePlan::new(model, g, DEFAULT_MISS_BUDGET)?;
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| f(&plan.sample(CouplingField::new(derive_seed(seed, r), 0))))
        .collect())
}

/// `P(0 ↔ ∂B_n within B_n)`.
pub fn boundary_connection_prob(k: &Kernel, beta: f64, n: i64, replicates: usize, seed: u64) -> Result<Estimate> {
    let hits = replicate_configs(EdgeModel::beta_j(k.clone(), beta)?, n, replicates, seed, origin_hits_boundary)?;
    Ok(Estimate::from_indicators(&hits, seed, "boundary_crossing"))
}

/// Mean largest-cluster density in `B_n`, the finite-volume θ proxy.
pub fn theta_density(k: &Kernel, beta: f64, n: i64, replicates: usize, seed: u64) -> Result<Estimate> {
    theta_density_model(EdgeModel::beta_j(k.clone(), beta)?, n, replicates, seed)
}

/// [`theta_density`] for any edge model.
pub fn theta_density_model(model: EdgeModel, n: i64, replicates: usize, seed: u64) -> Result<Estimate> {
    let xs = replicate_configs(model, n, replicates, seed, largest_density)?;
    Ok(Estimate::from_samples(&xs, seed, "largest_cluster_density"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Criterion {
    /// `P(0 ↔ ∂B_n) = 1/2` at the largest radius.
    BoundaryCrossingHalf,
    /// Largest-cluster density reaches `1/2` in half of the replicates.
    DensityKnee,
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Criterion> {
        match s {
            "boundary_crossing_half" => Ok(Criterion::BoundaryCrossingHalf),
            "density_knee" => Ok(Criterion::DensityKnee),
            _ => Err(Error::InvalidParameter(format!("unknown criterion `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketSettings {
    pub radii: Vec<i64>,
    pub criterion: Criterion,
    pub tol: f64,
    pub replicates: usize,
    pub seed: u64,
    pub miss_budget: f64,
}

impl BracketSettings {
    pub fn new(radii: Vec<i64>, criterion: Criterion, tol: f64, replicates: usize, seed: u64) -> BracketSettings {
        BracketSettings { radii, criterion, tol, replicates, seed, miss_budget: DEFAULT_MISS_BUDGET }
    }

    fn validate(&self) -> Result<()> {
        if self.radii.len() < 3 || self.radii.windows(2).any(|w| w[0] >= w[1]) || self.radii[0] < 1 {
            return Err(Error::InvalidParameter("need at least three increasing positive radii".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.replicates < 2 {
            return Err(Error::InvalidParameter("need at least two replicates".into()));
        }
        Ok(())
    }
}

/// Criterion statistic against the parameter at one radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionCurve {
    pub radius: i64,
    /// Median per-replicate threshold (`inf` if fewer than half activate).
    pub median_threshold: f64,
    /// `(parameter, fraction of replicates whose event has occurred)`.
    pub points: Vec<(f64, f64)>,
}

/// Finite-size bracket for a critical parameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaBracket {
    pub low: f64,
    pub high: f64,
    pub midpoint: f64,
    /// Order-statistic standard error of the midpoint.
    pub stderr: f64,
    pub parameter: String,
    pub criterion: Criterion,
    pub radii: Vec<i64>,
    /// Galton–Watson lower bound on the critical parameter.
    pub lower_bound: f64,
    /// Top of the searched range (configurations were sampled there).
    pub searched_max: f64,
    pub curves: Vec<CriterionCurve>,
}

#[derive(Clone, Copy, PartialEq)]
struct MinF(f64);

impl Eq for MinF {}

impl PartialOrd for MinF {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MinF {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0)
    }
}

/// Adjacency with per-edge activation values.
struct Activated {
    geometry: LatticeBox,
    off: Vec<usize>,
    adj: Vec<(u32, f64)>,
    edges: Vec<(u32, u32, f64)>,
}

impl Activated {
    fn new(cfg: &BoxConfig, act: impl Fn(&Point, f64) -> f64) -> Activated {
        let n = cfg.num_vertices();
        let us = cfg.uniforms().expect("sampled configuration carries uniforms");
        let mut edges: Vec<(u32, u32, f64)> = cfg
            .edges()
            .iter()
            .zip(us)
            .map(|(&(a, b), &u)| (a, b, act(&(cfg.point(b as usize) - cfg.point(a as usize)), u)))
            .collect();
        edges.sort_by(|x, y| x.2.total_cmp(&y.2).then((x.0, x.1).cmp(&(y.0, y.1))));
        let mut deg = vec![0usize; n + 1];
        for &(a, b, _) in &edges {
            deg[a as usize + 1] += 1;
            deg[b as usize + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut fill = deg.clone();
        let mut adj = vec![(0u32, 0.0); 2 * edges.len()];
        for &(a, b, t) in &edges {
            adj[fill[a as usize]] = (b, t);
            fill[a as usize] += 1;
            adj[fill[b as usize]] = (a, t);
            fill[b as usize] += 1;
        }
        Activated { geometry: *cfg.geometry(), off: deg, adj, edges }
    }

    /// Smallest parameter at which the centre connects to `∂B_r` inside `B_r`.
    fn crossing_threshold(&self, r: i64) -> f64 {
        let g = &self.geometry;
        let Some((c, _)) = g.as_ball() else { return f64::INFINITY };
        let o = g.index_of(&c).expect("centre");
        let mut best = vec![f64::INFINITY; self.off.len() - 1];
        let mut heap = BinaryHeap::new();
        best[o] = 0.0;
        heap.push((MinF(0.0), o));
        while let Some((MinF(b), v)) = heap.pop() {
            if b > best[v] {
                continue;
            }
            if (g.point(v) - c).linf() == r {
                return b;
            }
            for &(w, t) in &self.adj[self.off[v]..self.off[v + 1]] {
                let w = w as usize;
                let nb = b.max(t);
                if nb < best[w] && (g.point(w) - c).linf() <= r {
                    best[w] = nb;
                    heap.push((MinF(nb), w));
                }
            }
        }
        f64::INFINITY
    }

    /// Smallest parameter at which some cluster inside `B_r` holds half its vertices.
    fn density_threshold(&self, r: i64) -> f64 {
        let g = &self.geometry;
        let Some((c, _)) = g.as_ball() else { return f64::INFINITY };
        let sub = LatticeBox::ball(g.dim(), c, r).expect("sub-ball");
        let need = sub.volume().div_ceil(2);
        if need <= 1 {
            return 0.0;
        }
        let mut uf = UnionFind::new(sub.volume());
        for &(a, b, t) in &self.edges {
            let (Some(i), Some(j)) = (sub.index_of(&g.point(a as usize)), sub.index_of(&g.point(b as usize))) else {
                continue;
            };
            let root = uf.union(i, j);
            if uf.size_of(root) >= need {
                return t;
            }
        }
        f64::INFINITY
    }

    fn threshold(&self, criterion: Criterion, r: i64) -> f64 {
        match criterion {
            Criterion::BoundaryCrossingHalf => self.crossing_threshold(r),
            Criterion::DensityKnee => self.density_threshold(r),
        }
    }
}

fn fraction_at_most(thr: &[f64], x: f64) -> f64 {
    thr.iter().filter(|&&t| t <= x).count() as f64 / thr.len() as f64
}

/// Per-replicate thresholds at every radius for configurations sampled at `top`.
fn thresholds(
    make_model: &(dyn Fn(f64) -> Result<EdgeModel> + Sync),
    activation: &(dyn Fn(&Point, f64) -> f64 + Sync),
    top: f64,
    s: &BracketSettings,
) -> Result<Vec<Vec<f64>>> {
    let model = make_model(top)?;
    let rmax = *s.radii.last().expect("validated");
    let g = LatticeBox::centered(model.dim(), rmax)?;
    let plan = SamplePlan::new(model, g, s.miss_budget)?;
    let per_rep: Vec<Vec<f64>> = (0..s.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = plan.sample(CouplingField::new(derive_seed(s.seed, r), 0));
            let act = Activated::new(&cfg, activation);
            s.radii.iter().map(|&rad| act.threshold(s.criterion, rad)).collect()
        })
        .collect();
    Ok((0..s.radii.len()).map(|i| per_rep.iter().map(|v| v[i]).collect()).collect())
}

fn bracket_from(
    make_model: &(dyn Fn(f64) -> Result<EdgeModel> + Sync),
    activation: &(dyn Fn(&Point, f64) -> f64 + Sync),
    start: f64,
    limit: f64,
    lower_bound: f64,
    parameter: &str,
    s: &BracketSettings,
) -> Result<BetaBracket> {
    s.validate()?;
    let mut top = start.min(limit);
    let thr = loop {
        let thr = thresholds(make_model, activation, top, s)?;
        let last = thr.last().expect("radii");
        if fraction_at_most(last, top) >= 0.5 {
            break thr;
        }
        if top >= limit {
            return Err(Error::NoCrossing);
        }
        top = (2.0 * top).min(limit);
    };
    let last = thr.last().expect("radii");
    let stat = |x: f64| fraction_at_most(last, x);
    if stat(0.0) >= 0.5 {
        return Err(Error::NoCrossing);
    }
    let (mut lo, mut hi) = (0.0, top);
    while hi - lo > s.tol / 4.0 {
        let mid = 0.5 * (lo + hi);
        if stat(mid) >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let midpoint = 0.5 * (lo + hi);
    let mut sorted = last.clone();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    let half = r.sqrt() / 2.0;
    let qlo = sorted[((r / 2.0 - half).floor().max(0.0)) as usize];
    let qhi = sorted[((r / 2.0 + half).ceil() as usize).min(sorted.len() - 1)];
    let stderr = if qhi.is_finite() { ((qhi - qlo) / 2.0).max(0.0) } else { f64::INFINITY };
    let low = (midpoint - s.tol / 2.0).max(lower_bound);
    let high = (midpoint + s.tol / 2.0).max(low);
    let curves = s
        .radii
        .iter()
        .zip(&thr)
        .map(|(&radius, t)| CriterionCurve {
            radius,
            median_threshold: median(t),
            points: (0..=16).map(|i| top * i as f64 / 16.0).map(|x| (x, fraction_at_most(t, x))).collect(),
        })
        .collect();
    Ok(BetaBracket {
        low,
        high,
        midpoint,
        stderr,
        parameter: parameter.to_string(),
        criterion: s.criterion,
        radii: s.radii.clone(),
        lower_bound,
        searched_max: top,
        curves,
    })
}

/// Bracket for `β_c(J)`, searching `β` up to `64/ΣJ`.
pub fn betac_bracket(k: &Kernel, settings: &BracketSettings) -> Result<BetaBracket> {
    let mass = k.total_mass()?;
    if !(mass > 0.0) {
        return Err(Error::NoCrossing);
    }
    let gw = 1.0 / mass;
    let kk = k.clone();
    let make = move |b: f64| EdgeModel::beta_j(kk.clone(), b);
    let kj = k.clone();
    let activation = move |v: &Point, u: f64| -(-u).ln_1p() / kj.eval_class(&v.canonical_class(kj.dim()));
    bracket_from(&make, &activation, 4.0 * gw, 64.0 * gw, gw, "beta", settings)
}

/// Bracket for `p_c(f)` in the `(p, f)` model.
pub fn pc_bracket(sf: &ShortEdgeFunction, settings: &BracketSettings) -> Result<BetaBracket> {
    let d = sf.dim();
    let long = sf.linf_tail(0)?;
    let gw = ((1.0 - long) / (2.0 * d as f64)).max(0.0);
    let base = sf.clone();
    let make = move |p: f64| Ok(EdgeModel::ShortEdge(base.with_nn_probability(p)?));
    let activation = |v: &Point, u: f64| if v.norm2_sq() == 1 { u } else { 0.0 };
    bracket_from(&make, &activation, 1.0, 1.0, gw, "p", settings)
}

/// One truncation level of a locality sweep; `truncation = None` is the full kernel.
#[derive(Clone, Debug, Serialize)]
pub struct LocalityRow {
    pub truncation: Option<f64>,
    pub bracket: BetaBracket,
}

/// Brackets for `J_N = J·1{‖x‖ ≤ N}` over increasing `N`, then for `J`,
/// all with the same seeds.
pub fn locality_sweep(k: &Kernel, n_list: &[f64], settings: &BracketSettings) -> Result<Vec<LocalityRow>> {
    if n_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("truncation radii must increase".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        rows.push(LocalityRow { truncation: Some(n), bracket: betac_bracket(&k.truncate(n)?, settings)? });
    }
    rows.push(LocalityRow { truncation: None, bracket: betac_bracket(k, settings)? });
    Ok(rows)
}

/// `Σ_{v≠0} (1 − e^{−βJ(v)})` as `(estimate, rigorous upper bound)`.
///
/// Uses `1 − e^{−x} = x − g(x)` with `0 ≤ g(x) ≤ x²/2`: the linear part is
/// `β·ΣJ` exactly and `g` is summed out to a sup-radius `R` beyond which its
/// remainder is below `(β·tail(R))²/2 ≤ 1e−10`.
pub fn total_open_probability(k: &Kernel, beta: f64) -> Result<(f64, f64)> {
    if beta == 0.0 {
        return Ok((0.0, 0.0));
    }
    let linear = beta * k.total_mass()?;
    let mut r = 1;
    let rem = loop {
        let t = beta * k.linf_tail(r)?;
        if t * t / 2.0 <= 1e-10 || k.support_linf().is_some_and(|s| r >= s) {
            break t * t / 2.0;
        }
        r *= 2;
    };
    let mut g = Accumulator::default();
    for_each_class(k.dim(), r, |x, mult| {
        let p = Point::new(x);
        if !p.is_origin() {
            let y = beta * k.eval_class(&p);
            g.add(mult as f64 * (y + (-y).exp_m1()));
        }
    });
    let upper = linear - g.value();
    Ok((upper - rem / 2.0, upper))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PhiMode {
    Exact,
    MonteCarlo { replicates: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiResult {
    pub value: f64,
    /// Rigorous upper bound in exact mode; equals `value` otherwise.
    pub upper: f64,
    /// `upper < 1` in exact mode, which certifies `β ≤ β_c`.
    pub certified: bool,
    pub mode: PhiMode,
}

/// `φ_{β,J}(S) = Σ_{x∈S} Σ_{y∉S} P(0 ↔ x within S)(1 − e^{−βJ(x−y)})`.
pub fn phi_value(k: &Kernel, beta: f64, set: &[Point], mode: PhiMode) -> Result<PhiResult> {
    let s = dedup_points(set);
    if !s.contains(&Point::ORIGIN) {
        return Err(Error::OriginMissing);
    }
    let model = EdgeModel::beta_j(k.clone(), beta)?;
    if mode == PhiMode::Exact && s.len() > ORACLE_MAX_VERTICES {
        return Err(Error::TooLarge(format!("{} vertices (at most {ORACLE_MAX_VERTICES})", s.len())));
    }
    let (tot, tot_upper) = total_open_probability(k, beta)?;
    let mut value = Accumulator::default();
    let mut upper = Accumulator::default();
    for x in &s {
        let conn = if x.is_origin() {
            1.0
        } else {
            match mode {
                PhiMode::Exact => exact_connection_prob(&model, &s, &Point::ORIGIN, std::slice::from_ref(x))?,
                PhiMode::MonteCarlo { replicates, seed } => {
                    connection_prob_within(&model, &s, &Point::ORIGIN, std::slice::from_ref(x), replicates, seed)?
                        .value
                }
            }
        };
        let mut inside = Accumulator::default();
        for y in &s {
            if y != x {
                inside.add(model.probability(&(*y - *x))?);
            }
        }
        value.add(conn * (tot - inside.value()));
        upper.add(conn * (tot_upper - inside.value()));
    }
    let exact = mode == PhiMode::Exact;
    let v = value.value();
    let u = if exact { upper.value() } else { v };
    Ok(PhiResult { value: v, upper: u, certified: exact && u < 1.0, mode })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2(x: i64, y: i64) -> Point {
        Point::new(&[x, y])
    }

    #[test]
    fn oracle_fixtures() {
        let k = Kernel::nearest_neighbor(2, 1.0).unwrap();
        let beta = 0.7;
        let single = exact_connect_oracle(&k, beta, &[p2(0, 0), p2(1, 0)], &p2(0, 0), &p2(1, 0)).unwrap();
        assert!((single - (1.0 - (-beta).exp())).abs() < 1e-15);
        assert_eq!(exact_connect_oracle(&k, beta, &[p2(0, 0)], &p2(0, 0), &p2(0, 0)).unwrap(), 1.0);
        let big: Vec<Point> = (0..7).map(|i| p2(i, 0)).collect();
        assert!(matches!(exact_connect_oracle(&k, beta, &big, &p2(0, 0), &p2(1, 0)), Err(Error::TooLarge(_))));
    }

    #[test]
    fn oracle_triangle() {
        let k = Kernel::tabulated(2, vec![(p2(1, 0), 1.0), (p2(1, 1), 1.0)]).unwrap();
        let beta: f64 = 0.4;
        let p = 1.0 - (-beta).exp();
        let tri = [p2(0, 0), p2(1, 0), p2(0, 1)];
        let got = exact_connect_oracle(&k, beta, &tri, &p2(0, 0), &p2(1, 0)).unwrap();
        // eight states of the three edges, enumerated independently
        let mut want = 0.0;
        for m in 0..8u32 {
            let (a, b, c) = (m & 1 == 1, m & 2 == 2, m & 4 == 4);
            let w: f64 = [a, b, c].iter().map(|&o| if o { p } else { 1.0 - p }).product();
            if a || (b && c) {
                want += w;
            }
        }
        assert!((got - want).abs() < 1e-15);
        assert!((got - (p + p * p * (1.0 - p))).abs() < 1e-15);
    }

    #[test]
    fn mc_matches_oracle() {
        let k = Kernel::power_law(2, 1.0, 3.0).unwrap();
        let m = EdgeModel::beta_j(k, 0.5).unwrap();
        let v = [p2(0, 0), p2(1, 0), p2(2, 1), p2(0, 2)];
        let exact = exact_connection_prob(&m, &v, &p2(0, 0), &[p2(0, 2)]).unwrap();
        let est = connection_prob_within(&m, &v, &p2(0, 0), &[p2(0, 2)], 4000, 3).unwrap();
        assert!(est.agrees_with(exact, 4.0), "{est:?} vs {exact}");
    }

    #[test]
    fn boundary_and_density_fixtures() {
        let k = Kernel::power_law(2, 1.0, 5.0).unwrap();
        assert_eq!(boundary_connection_prob(&k, 0.0, 3, 10, 1).unwrap().value, 0.0);
        let t = theta_density(&k, 0.0, 3, 5, 1).unwrap();
        assert_eq!(t.value, 1.0 / 49.0);
        let full = BoxConfig::all_nearest_neighbor(LatticeBox::centered(2, 4).unwrap());
        assert!(origin_hits_boundary(&full));
        assert_eq!(largest_density(&full), 1.0);
    }

    #[test]
    fn phi_single_site() {
        let k = Kernel::power_law(1, 1.0, 3.0).unwrap();
        let beta = 0.05;
        let phi = phi_value(&k, beta, &[Point::ORIGIN], PhiMode::Exact).unwrap();
        let mut direct = 0.0;
        for y in (1..2_000_000i64).rev() {
            direct += 2.0 * -(-beta / (y as f64).powi(3)).exp_m1();
        }
        direct += beta / (2_000_000f64).powi(2);
        assert!((phi.value - direct).abs() < 1e-9, "{} vs {direct}", phi.value);
        assert!(phi.certified);
        assert_eq!(phi_value(&k, 0.0, &[Point::ORIGIN], PhiMode::Exact).unwrap().value, 0.0);
        assert_eq!(phi_value(&k, 0.1, &[Point::new(&[1])], PhiMode::Exact), Err(Error::OriginMissing));
    }

    #[test]
    fn bracket_rejects_zero_kernel() {
        let k = Kernel::nearest_neighbor(2, 0.0).unwrap();
        let s = BracketSettings::new(vec![2, 4, 8], Criterion::BoundaryCrossingHalf, 0.1, 8, 1);
        assert_eq!(betac_bracket(&k, &s), Err(Error::NoCrossing));
    }

    #[test]
    fn bracket_respects_galton_watson() {
        let k = Kernel::power_law(2, 1.0, 5.0).unwrap();
        for crit in [Criterion::BoundaryCrossingHalf, Criterion::DensityKnee] {
            let s = BracketSettings::new(vec![4, 8, 12], crit, 0.05, 16, 2);
            let b = betac_bracket(&k, &s).unwrap();
            assert!(b.low >= 1.0 / k.total_mass().unwrap());
            assert!(b.low <= b.high && b.high - b.low <= 0.05 + 1e-12);
            assert_eq!(b.curves.len(), 3);
        }
    }

    #[test]
    fn thresholds_agree_with_direct_sampling() {
        let k = Kernel::power_law(2, 1.0, 4.0).unwrap();
        let g = LatticeBox::centered(2, 6).unwrap();
        let top = 1.0;
        let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), top).unwrap(), g, 1e-3).unwrap();
        for seed in 0..10 {
            let cfg = plan.sample(CouplingField::new(seed, 0));
            let act = Activated::new(&cfg, |v, u| -(-u).ln_1p() / k.eval(v).unwrap());
            let t = act.crossing_threshold(6);
            for beta in [0.1, 0.2, 0.3, 0.5, 0.8] {
                let low = cfg.restrict_beta(beta).unwrap();
                assert_eq!(origin_hits_boundary(&low), t <= beta, "seed {seed} beta {beta}");
                let kt = act.density_threshold(6);
                assert_eq!(largest_density(&low) >= 0.5, kt <= beta);
            }
        }
    }
}
