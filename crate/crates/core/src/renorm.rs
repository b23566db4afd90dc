//! Renormalization probes: annulus pad connections, the three-stream
//! directed exploration over the quadrant, the abstract directed site-bond
//! model, and the depth-without-pad exploration.
//!
//! Quadrant vertices `u ∈ N_0 × N_0 × {0}^{d−2}` stand for blocks `B_n(8nu)`.
//! Step (1.) of a level explores `M_1^u` with streams 0 (`ω_β̃`) and 1
//! (`ω'_η`); step (2.) explores `M_2^u` with streams 0 and 2 (`ω''_η`).
//! Rectangles are sampled on demand from the shared coupling, so overlapping
//! regions always agree edge by edge.

use crate::cluster::{find_mpads, restricted_cluster, restricted_cluster_from};
use crate::coupling::{absorb, derive_seed, to_unit, CouplingField, STREAM_BASE, STREAM_SPRINKLE_1, STREAM_SPRINKLE_2};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lattice::{LatticeBox, Point, VertexSet, MAX_DIM};
use crate::sampler::{BoxConfig, EdgeModel, SamplePlan, DEFAULT_MISS_BUDGET, EXHAUSTIVE_BUDGET};
use crate::stats::Estimate;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

/// Kernel whose support covers every displacement with `|x|_∞ ≤ n`;
/// callers filter the sampled edges back to sup-length `n`.
fn linf_truncation(k: &Kernel, n: i64) -> Result<Kernel> {
    k.truncate(n as f64 * (k.dim() as f64).sqrt() + 1e-6)
}

fn full_set(cfg: &BoxConfig) -> VertexSet {
    VertexSet::full(cfg.num_vertices())
}

/// `P(K_R(B_n) ∼ P^δ_{m,n})` with `R = B_m(0)`: the cluster of the central
/// `m`-ball inside `B_n` has an open edge to an open `m`-pad lying in the
/// annulus `B_{(1+δ)n} \ B_n`.
pub fn annulus_pad_probe(
    k: &Kernel,
    beta: f64,
    n: i64,
    m: i64,
    delta: f64,
    replicates: usize,
    seed: u64,
) -> Result<Estimate> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("δ must lie in (0,1], got {delta}")));
    }
    if m < 0 || (m as f64) >= delta * n as f64 / 3.0 {
        return Err(Error::GeometryInfeasible(format!("m = {m} must satisfy m < δn/3 = {}", delta * n as f64 / 3.0)));
    }
    let d = k.dim();
    let outer_r = ((1.0 + delta) * n as f64).floor() as i64;
    let outer = LatticeBox::centered(d, outer_r)?;
    let inner = LatticeBox::centered(d, n)?;
    let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), beta)?, outer, DEFAULT_MISS_BUDGET)?;
    let hits: Vec<bool> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = plan.sample(CouplingField::new(derive_seed(seed, r), STREAM_BASE));
            annulus_event(&cfg, &inner, m)
        })
        .collect();
    Ok(Estimate::from_indicators(&hits, seed, "annulus_pad"))
}

/// The event of [`annulus_pad_probe`] on one configuration of `B_{(1+δ)n}`.
pub fn annulus_event(cfg: &BoxConfig, inner: &LatticeBox, m: i64) -> bool {
    let g = cfg.geometry();
    let d = g.dim();
    let Ok(core) = LatticeBox::centered(d, m) else { return false };
    let inside = VertexSet::from_subbox(g, inner);
    let sources: Vec<usize> = core.points().map(|p| g.index_of(&p).expect("inside")).collect();
    let Ok(cluster) = restricted_cluster_from(cfg, &sources, &inside) else { return false };
    let annulus = VertexSet::full(cfg.num_vertices()).difference(&inside);
    let mut pad_mask = vec![false; cfg.num_vertices()];
    for c in find_mpads(cfg, &annulus, m) {
        for p in LatticeBox::ball(d, c, m).expect("ball").points() {
            pad_mask[g.index_of(&p).expect("inside")] = true;
        }
    }
    cluster.iter().any(|&v| cfg.neighbors(v).iter().any(|&w| pad_mask[w as usize]))
}

/// Scales, truncation, depth and the split `β = β̃ + 2η` of an exploration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplorationParams {
    pub n: i64,
    pub m: i64,
    pub truncation: i64,
    pub depth: usize,
    pub beta: f64,
    pub beta_tilde: f64,
    pub eta: f64,
}

impl ExplorationParams {
    /// Default split `β̃ = 0.75β`, `η = 0.125β`.
    pub fn new(beta: f64, n: i64, m: i64, truncation: i64, depth: usize) -> Result<ExplorationParams> {
        ExplorationParams { n, m, truncation, depth, beta, beta_tilde: 0.75 * beta, eta: 0.125 * beta }.checked()
    }

    pub fn with_split(mut self, beta_tilde: f64, eta: f64) -> Result<ExplorationParams> {
        self.beta_tilde = beta_tilde;
        self.eta = eta;
        self.checked()
    }

    fn checked(self) -> Result<ExplorationParams> {
        if !(self.beta >= 0.0 && self.beta_tilde >= 0.0 && self.eta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::SplitInvalid(format!("β={}, β̃={}, η={}", self.beta, self.beta_tilde, self.eta)));
        }
        if (self.beta_tilde + 2.0 * self.eta - self.beta).abs() > 1e-12 * self.beta.max(1.0) {
            return Err(Error::SplitInvalid(format!(
                "β̃ + 2η = {} differs from β = {}",
                self.beta_tilde + 2.0 * self.eta,
                self.beta
            )));
        }
        if self.n < 1 || self.m < 0 || self.m > self.n {
            return Err(Error::GeometryInfeasible(format!("need 0 ≤ m ≤ n, n ≥ 1 (m={}, n={})", self.m, self.n)));
        }
        if self.truncation < 1 || self.truncation > 14 * self.n {
            return Err(Error::GeometryInfeasible(format!("truncation {} outside [1, 14n]", self.truncation)));
        }
        Ok(self)
    }

    /// `M_i^u = 8nu + M_i` for axis `i ∈ {0, 1}`.
    pub fn rectangle(&self, dim: usize, u: &Point, axis: usize) -> Result<LatticeBox> {
        let n = self.n;
        let c = *u * (8 * n);
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for j in 0..dim {
            lo[j] = c.0[j] - 3 * n;
            hi[j] = c.0[j] + if j == axis { 11 * n } else { 3 * n };
        }
        LatticeBox::new(dim, Point(lo), Point(hi))
    }

    fn block(&self, dim: usize, u: &Point, radius_in_n: i64) -> Result<LatticeBox> {
        LatticeBox::ball(dim, *u * (8 * self.n), radius_in_n * self.n)
    }
}

/// Supplier of the three independent edge streams.
pub trait StreamSource: Sync {
    fn dim(&self) -> usize;
    /// Open edges of one stream inside a box.
    fn region(&self, stream: u8, region: &LatticeBox) -> Result<BoxConfig>;
    /// Whether a single edge is open in one stream.
    fn edge_open(&self, stream: u8, a: &Point, b: &Point) -> Result<bool>;
}

/// Streams drawn from the coupling field at `(β̃, η, η)`, truncated to sup-length `N`.
pub struct CoupledStreams {
    seed: u64,
    truncation: i64,
    kernel: Kernel,
    betas: [f64; 3],
    plans: Vec<(u8, SamplePlan)>,
}

impl CoupledStreams {
    pub fn new(k: &Kernel, params: &ExplorationParams, seed: u64) -> Result<CoupledStreams> {
        let kernel = linf_truncation(k, params.truncation)?;
        let betas = [params.beta_tilde, params.eta, params.eta];
        let d = k.dim();
        let mut plans = Vec::new();
        for (stream, axis) in [(STREAM_BASE, 0), (STREAM_BASE, 1), (STREAM_SPRINKLE_1, 0), (STREAM_SPRINKLE_2, 1)] {
            let g = params.rectangle(d, &Point::ORIGIN, axis)?;
            let model = EdgeModel::beta_j(kernel.clone(), betas[stream as usize])?;
            plans.push((stream, SamplePlan::new(model, g, EXHAUSTIVE_BUDGET)?));
        }
        Ok(CoupledStreams { seed, truncation: params.truncation, kernel, betas, plans })
    }

    fn plan_for(&self, stream: u8, region: &LatticeBox) -> Result<SamplePlan> {
        let d = region.dim();
        for (s, plan) in &self.plans {
            let g = plan.geometry();
            if *s == stream && (0..d).all(|i| g.side(i) == region.side(i)) {
                return plan.translated(&(region.lo() - g.lo()));
            }
        }
        let model = EdgeModel::beta_j(self.kernel.clone(), self.betas[stream as usize])?;
        SamplePlan::new(model, *region, EXHAUSTIVE_BUDGET)
    }
}

impl StreamSource for CoupledStreams {
    fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn region(&self, stream: u8, region: &LatticeBox) -> Result<BoxConfig> {
        let plan = self.plan_for(stream, region)?;
        Ok(plan.sample(CouplingField::new(self.seed, stream)).filter_max_linf(self.truncation))
    }

    fn edge_open(&self, stream: u8, a: &Point, b: &Point) -> Result<bool> {
        if (*b - *a).linf() > self.truncation {
            return Ok(false);
        }
        CouplingField::new(self.seed, stream).edge_open(a, b, self.betas[stream as usize], &self.kernel)
    }
}

/// Deterministic streams: each one either has every nearest-neighbour edge
/// open or is empty.
#[derive(Clone, Copy, Debug)]
pub struct FixtureStreams {
    pub dim: usize,
    pub open: [bool; 3],
}

impl StreamSource for FixtureStreams {
    fn dim(&self) -> usize {
        self.dim
    }

    fn region(&self, stream: u8, region: &LatticeBox) -> Result<BoxConfig> {
        Ok(if self.open[stream as usize] {
            BoxConfig::all_nearest_neighbor(*region)
        } else {
            BoxConfig::empty(*region)
        })
    }

    fn edge_open(&self, stream: u8, a: &Point, b: &Point) -> Result<bool> {
        Ok(self.open[stream as usize] && (*b - *a).l1() == 1)
    }
}

/// Which stream a step consulted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StreamAccess {
    pub level: usize,
    pub step: u8,
    pub stream: u8,
}

/// One CSV row of the exploration trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelTrace {
    pub level: usize,
    pub active: usize,
    pub blocks_sampled: usize,
    pub edges_drawn: usize,
}

/// Replayed open path from `B_m(0)` into a pad of the deepest level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathCertificate {
    pub path: Vec<Point>,
    pub max_edge_linf: i64,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplorationResult {
    /// Largest `k` with `A_k ≠ ∅`; `None` when `B_m(0)` is not a pad.
    pub survival_depth: Option<usize>,
    pub survived: bool,
    /// `A_k` as quadrant coordinates `(u_1, u_2)`, lexicographically sorted.
    pub active: Vec<Vec<(i64, i64)>>,
    pub trace: Vec<LevelTrace>,
    pub certificate: Option<PathCertificate>,
    pub access_log: Vec<StreamAccess>,
}

struct StepRecord {
    u: Point,
    axis: usize,
    /// `R` (`R_1^u` or `R_2^u`) as a mask over `M`.
    r_mask: Vec<bool>,
    omega: BoxConfig,
    sprinkle: BoxConfig,
    r_plus: Vec<usize>,
    /// `X_i^u` as a mask over `M`.
    x_mask: Vec<bool>,
    pad: Option<Point>,
}

struct NodeInfo {
    r1: Vec<Point>,
    creator: Option<usize>,
    step1: Option<usize>,
}

fn quad(u: &Point) -> (i64, i64) {
    (u.0[0], u.0[1])
}

fn quad_point(dim: usize, q: (i64, i64)) -> Point {
    let mut c = [0i64; MAX_DIM];
    c[0] = q.0;
    c[1] = q.1;
    let _ = dim;
    Point(c)
}

struct Explorer<'a, S: StreamSource> {
    src: &'a S,
    params: &'a ExplorationParams,
    dim: usize,
    steps: Vec<StepRecord>,
    log: Vec<StreamAccess>,
    edges_drawn: usize,
    blocks: usize,
}

impl<'a, S: StreamSource> Explorer<'a, S> {
    fn run_step(&mut self, level: usize, u: Point, axis: usize, r: &[Point]) -> Result<usize> {
        let m_box = self.params.rectangle(self.dim, &u, axis)?;
        let sprinkle_stream = if axis == 0 { STREAM_SPRINKLE_1 } else { STREAM_SPRINKLE_2 };
        let omega = self.src.region(STREAM_BASE, &m_box)?;
        let sprinkle = self.src.region(sprinkle_stream, &m_box)?;
        let step = axis as u8 + 1;
        self.log.push(StreamAccess { level, step, stream: STREAM_BASE });
        self.log.push(StreamAccess { level, step, stream: sprinkle_stream });
        self.blocks += 1;
        self.edges_drawn += omega.num_edges() + sprinkle.num_edges();
        let nv = m_box.volume();
        let mut r_mask = vec![false; nv];
        for p in r {
            r_mask[m_box.index_of(p).expect("R lies in M")] = true;
        }
        let mut plus = vec![false; nv];
        for &(a, b) in sprinkle.edges() {
            let (a, b) = (a as usize, b as usize);
            if r_mask[a] && !r_mask[b] {
                plus[b] = true;
            }
            if r_mask[b] && !r_mask[a] {
                plus[a] = true;
            }
        }
        let r_plus: Vec<usize> = (0..nv).filter(|&i| plus[i]).collect();
        let outside = VertexSet::from_mask(r_mask.iter().map(|&b| !b).collect());
        let mut x_mask = vec![false; nv];
        if !r_plus.is_empty() {
            for v in restricted_cluster_from(&omega, &r_plus, &outside)? {
                x_mask[v] = true;
            }
        }
        let target = self.params.block(self.dim, &(u + Point::unit(axis)), 1)?;
        let region = VertexSet::from_indices(
            nv,
            target.points().map(|p| m_box.index_of(&p).expect("target in M")).filter(|&i| x_mask[i]),
        );
        let pad = find_mpads(&omega, &region, self.params.m).into_iter().next();
        self.steps.push(StepRecord { u, axis, r_mask, omega, sprinkle, r_plus, x_mask, pad });
        Ok(self.steps.len() - 1)
    }

    fn x_within(&self, step: usize, ball: &LatticeBox) -> Vec<Point> {
        let rec = &self.steps[step];
        let g = rec.omega.geometry();
        ball.points().filter(|p| g.index_of(p).is_some_and(|i| rec.x_mask[i])).collect()
    }

    /// Vertices of a path from `B_m(0)` ending at `z ∈ X` of `step`.
    fn trace(&self, nodes: &HashMap<(i64, i64), NodeInfo>, step: usize, z: Point) -> Result<Vec<Point>> {
        let rec = &self.steps[step];
        let g = *rec.omega.geometry();
        let zi = g.index_of(&z).filter(|&i| rec.x_mask[i]).ok_or(Error::SourceOutsideSet)?;
        // BFS inside M \ R from R_+ back to z
        let mut parent = vec![usize::MAX; g.volume()];
        let mut queue = VecDeque::new();
        for &s in &rec.r_plus {
            parent[s] = s;
            queue.push_back(s);
        }
        while let Some(v) = queue.pop_front() {
            if v == zi {
                break;
            }
            for &w in rec.omega.neighbors(v) {
                let w = w as usize;
                if parent[w] == usize::MAX && !rec.r_mask[w] {
                    parent[w] = v;
                    queue.push_back(w);
                }
            }
        }
        let mut local = vec![zi];
        while parent[*local.last().expect("nonempty")] != *local.last().expect("nonempty") {
            local.push(parent[*local.last().expect("nonempty")]);
        }
        local.reverse();
        let b = local[0];
        let a = rec
            .sprinkle
            .neighbors(b)
            .iter()
            .map(|&w| w as usize)
            .filter(|&w| rec.r_mask[w])
            .min()
            .expect("R_+ vertices have a sprinkled edge into R");
        let ap = g.point(a);
        let info = &nodes[&quad(&rec.u)];
        let mut prefix = if rec.axis == 1 && info.r1.binary_search(&ap).is_err() {
            self.trace(nodes, info.step1.expect("step 1 ran before step 2"), ap)?
        } else if let Some(c) = info.creator {
            self.trace(nodes, c, ap)?
        } else {
            vec![ap]
        };
        prefix.extend(local.into_iter().map(|i| g.point(i)));
        Ok(prefix)
    }
}

/// Runs the exploration on the given streams.
pub fn explore_with<S: StreamSource>(src: &S, params: &ExplorationParams) -> Result<ExplorationResult> {
    let dim = src.dim();
    if dim < 2 {
        return Err(Error::GeometryInfeasible("the quadrant exploration needs d ≥ 2".into()));
    }
    let params = params.clone().checked()?;
    let mut ex = Explorer { src, params: &params, dim, steps: Vec::new(), log: Vec::new(), edges_drawn: 0, blocks: 0 };
    let core = LatticeBox::centered(dim, params.m)?;
    let base = src.region(STREAM_BASE, &core)?;
    ex.log.push(StreamAccess { level: 0, step: 0, stream: STREAM_BASE });
    let mut result = ExplorationResult {
        survival_depth: None,
        survived: false,
        active: Vec::new(),
        trace: Vec::new(),
        certificate: None,
        access_log: Vec::new(),
    };
    if find_mpads(&base, &full_set(&base), params.m).is_empty() {
        result.access_log = ex.log;
        result.trace.push(LevelTrace { level: 0, active: 0, blocks_sampled: 1, edges_drawn: base.num_edges() });
        return Ok(result);
    }
    let mut nodes: HashMap<(i64, i64), NodeInfo> = HashMap::new();
    nodes.insert((0, 0), NodeInfo { r1: core.points().collect(), creator: None, step1: None });
    let mut level: Vec<(i64, i64)> = vec![(0, 0)];
    result.active.push(level.clone());
    result.trace.push(LevelTrace { level: 0, active: 1, blocks_sampled: 1, edges_drawn: base.num_edges() });
    for k in 1..=params.depth {
        ex.blocks = 0;
        ex.edges_drawn = 0;
        let mut declared: BTreeMap<(i64, i64), Option<usize>> = BTreeMap::new();
        for &q in &level {
            let u = quad_point(dim, q);
            let r1 = nodes[&q].r1.clone();
            let s = ex.run_step(k, u, 0, &r1)?;
            nodes.get_mut(&q).expect("active").step1 = Some(s);
            let w = (q.0 + 1, q.1);
            declared.insert(w, ex.steps[s].pad.map(|_| s));
        }
        let mut step2: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for &q in &level {
            let w = (q.0, q.1 + 1);
            if declared.contains_key(&w) {
                continue;
            }
            let u = quad_point(dim, q);
            let info = &nodes[&q];
            let near = params.block(dim, &u, 3)?;
            let mut r2: BTreeSet<Point> = info.r1.iter().copied().collect();
            r2.extend(ex.x_within(info.step1.expect("step 1 ran"), &near));
            let r2: Vec<Point> = r2.into_iter().collect();
            let s = ex.run_step(k, u, 1, &r2)?;
            if ex.steps[s].pad.is_some() {
                step2.insert(w, s);
            }
        }
        let mut next: Vec<(i64, i64)> = Vec::new();
        let activated = declared.into_iter().filter_map(|(w, s)| s.map(|s| (w, s))).chain(step2);
        for (w, s) in activated {
            let wp = quad_point(dim, w);
            let near = params.block(dim, &wp, 3)?;
            let mut r1 = ex.x_within(s, &near);
            r1.sort();
            nodes.insert(w, NodeInfo { r1, creator: Some(s), step1: None });
            next.push(w);
        }
        next.sort();
        result.trace.push(LevelTrace { level: k, active: next.len(), blocks_sampled: ex.blocks, edges_drawn: ex.edges_drawn });
        if next.is_empty() {
            break;
        }
        result.active.push(next.clone());
        level = next;
    }
    let deepest = result.active.len() - 1;
    result.survival_depth = Some(deepest);
    result.survived = deepest == params.depth;
    let target = result.active[deepest][0];
    let path = match nodes[&target].creator {
        None => vec![Point::ORIGIN],
        Some(s) => {
            let pad = ex.steps[s].pad.expect("activating step found a pad");
            ex.trace(&nodes, s, pad)?
        }
    };
    result.certificate = Some(verify_path(src, &params, &path, nodes[&target].creator.map(|s| ex.steps[s].pad.expect("pad")))?);
    result.access_log = ex.log;
    Ok(result)
}

/// Re-checks a path edge by edge against the streams.
fn verify_path<S: StreamSource>(
    src: &S,
    params: &ExplorationParams,
    path: &[Point],
    pad_center: Option<Point>,
) -> Result<PathCertificate> {
    let dim = src.dim();
    let core = LatticeBox::centered(dim, params.m)?;
    let mut ok = path.first().is_some_and(|p| core.contains(p));
    if let (Some(c), Some(last)) = (pad_center, path.last()) {
        ok &= LatticeBox::ball(dim, c, params.m)?.contains(last);
    }
    let mut longest = 0;
    for w in path.windows(2) {
        let len = (w[1] - w[0]).linf();
        longest = longest.max(len);
        let mut open = false;
        for s in [STREAM_BASE, STREAM_SPRINKLE_1, STREAM_SPRINKLE_2] {
            open |= src.edge_open(s, &w[0], &w[1])?;
        }
        ok &= open && len <= 14 * params.n;
    }
    Ok(PathCertificate { path: path.to_vec(), max_edge_linf: longest, verified: ok })
}

/// One exploration on streams coupled to `seed`.
pub fn directed_exploration(k: &Kernel, params: &ExplorationParams, seed: u64) -> Result<ExplorationResult> {
    explore_with(&CoupledStreams::new(k, params, seed)?, params)
}

/// Survival statistics of many explorations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplorationSummary {
    pub survival: Estimate,
    pub certificates_checked: usize,
    pub certificates_verified: usize,
    pub mean_depth: f64,
}

pub fn exploration_survival(k: &Kernel, params: &ExplorationParams, replicates: usize, seed: u64) -> Result<ExplorationSummary> {
    let runs: Vec<Result<ExplorationResult>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| directed_exploration(k, params, derive_seed(seed, r)))
        .collect();
    let runs: Vec<ExplorationResult> = runs.into_iter().collect::<Result<_>>()?;
    let hits: Vec<bool> = runs.iter().map(|r| r.survived).collect();
    let checked: Vec<&PathCertificate> = runs.iter().filter(|r| r.survived).filter_map(|r| r.certificate.as_ref()).collect();
    let depths: Vec<f64> = runs.iter().map(|r| r.survival_depth.map_or(-1.0, |d| d as f64)).collect();
    Ok(ExplorationSummary {
        survival: Estimate::from_indicators(&hits, seed, "directed_exploration"),
        certificates_checked: checked.len(),
        certificates_verified: checked.iter().filter(|c| c.verified).count(),
        mean_depth: depths.iter().sum::<f64>() / depths.len().max(1) as f64,
    })
}

/// First candidate `(n, m)` whose annulus probe at `β` reaches `target`.
pub fn calibrate_scales(
    k: &Kernel,
    beta: f64,
    delta: f64,
    candidates: &[(i64, i64)],
    target: f64,
    replicates: usize,
    seed: u64,
) -> Result<Option<((i64, i64), Estimate)>> {
    for &(n, m) in candidates {
        let e = annulus_pad_probe(k, beta, n, m, delta, replicates, seed)?;
        if e.value >= target {
            return Ok(Some(((n, m), e)));
        }
    }
    Ok(None)
}

/// Directed site-bond model on the quadrant with conditional opening
/// probabilities `q = (q_{e_1}, q_{e_2})`, optionally restricted to the
/// columns `u_1 < width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirectedModel {
    pub rho: f64,
    pub q: [f64; 2],
    pub width: Option<usize>,
}

impl DirectedModel {
    pub fn new(rho: f64, q1: f64, q2: f64) -> Result<DirectedModel> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("ρ must lie in [0,1], got {rho}")));
        }
        for q in [q1, q2] {
            if !(q >= rho && q <= 1.0) {
                return Err(Error::InvalidParameter(format!("q = {q} must lie in [ρ, 1] = [{rho}, 1]")));
            }
        }
        Ok(DirectedModel { rho, q: [q1, q2], width: None })
    }

    /// `q ≡ ρ`.
    pub fn uniform(rho: f64) -> Result<DirectedModel> {
        DirectedModel::new(rho, rho, rho)
    }

    pub fn with_width(mut self, width: usize) -> DirectedModel {
        self.width = Some(width);
        self
    }
}

/// Active sets by level, indexed by the first quadrant coordinate.
///
/// Each vertex of level `k` is decided at most once, with its own uniform:
/// by the `e_1` edge from its left parent if that parent is active (step
/// (1.)), otherwise by the `e_2` edge from its lower parent (step (2.)).
pub fn directed_run(model: &DirectedModel, depth: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut levels = vec![vec![0usize]];
    let mut cur = vec![true];
    for k in 1..=depth {
        let len = match model.width {
            Some(w) => (k + 1).min(w),
            None => k + 1,
        };
        let mut next = vec![false; len];
        for (i, slot) in next.iter_mut().enumerate() {
            let left = i >= 1 && cur.get(i - 1).copied().unwrap_or(false);
            let below = cur.get(i).copied().unwrap_or(false);
            if !(left || below) {
                continue;
            }
            let q = if left { model.q[0] } else { model.q[1] };
            let u = to_unit(absorb(absorb(seed, k as u64), i as u64));
            *slot = u < q;
        }
        let active: Vec<usize> = (0..len).filter(|&i| next[i]).collect();
        levels.push(active.clone());
        cur = next;
        if active.is_empty() {
            break;
        }
    }
    levels
}

/// Fraction of replicates with `A_depth ≠ ∅`.
pub fn directed_survival(model: &DirectedModel, depth: usize, replicates: usize, seed: u64) -> Estimate {
    let hits: Vec<bool> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let lv = directed_run(model, depth, derive_seed(seed, r));
            lv.len() == depth + 1 && !lv[depth].is_empty()
        })
        .collect();
    Estimate::from_indicators(&hits, seed, "directed_survival")
}

/// Exact survival probability of the width-restricted model, by evolving the
/// distribution over the `2^width` column states.
pub fn directed_survival_exact(model: &DirectedModel, depth: usize) -> Result<f64> {
    let w = model.width.ok_or_else(|| Error::InvalidParameter("exact recursion needs a finite width".into()))?;
    if w == 0 || w > 16 {
        return Err(Error::TooLarge(format!("width {w} (1..=16 supported)")));
    }
    let mut dist = vec![0.0f64; 1 << w];
    dist[1] = 1.0;
    for k in 1..=depth {
        let len = (k + 1).min(w);
        let mut next = vec![0.0f64; 1 << w];
        for (state, &mass) in dist.iter().enumerate() {
            if mass == 0.0 || state == 0 {
                continue;
            }
            // per-column opening probability given the previous level
            let mut probs = Vec::with_capacity(len);
            for i in 0..len {
                let left = i >= 1 && state >> (i - 1) & 1 == 1;
                let below = state >> i & 1 == 1;
                probs.push(if left { model.q[0] } else if below { model.q[1] } else { 0.0 });
            }
            let mut partial = vec![(0usize, mass)];
            for (i, &p) in probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let mut grown = Vec::with_capacity(partial.len() * 2);
                for &(s, m) in &partial {
                    if p < 1.0 {
                        grown.push((s, m * (1.0 - p)));
                    }
                    grown.push((s | 1 << i, m * p));
                }
                partial = grown;
            }
            for (s, m) in partial {
                next[s] += m;
            }
        }
        next[0] = 0.0;
        dist = next;
    }
    Ok(dist.iter().sum())
}

/// Parameters of the depth-without-pad probe.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthParams {
    /// Edge-length cap `r` of the explored graph; `None` for no cap.
    pub r: Option<i64>,
    /// Finite range `N < r` of the box clusters.
    pub truncation: i64,
    pub k: usize,
    /// Radius of the sampled box; defaults to `k + 4·max(r, N)`.
    pub box_radius: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthProbe {
    pub estimate: Estimate,
    pub block_side: i64,
    pub mean_blocks: f64,
    /// Replicates whose graph ball reached the sampled box boundary.
    pub truncated: usize,
}

/// Outcome of the depth exploration on one configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepthOutcome {
    pub event: bool,
    pub ball_size: usize,
    pub blocks: usize,
    pub hit_boundary: bool,
}

/// Graph-distance exploration of `B_k(0, ω_{≤r})` with `K`-block cluster
/// checks in `ω_{≤N}`; `event` is `|B_k| ≥ k` with no block cluster of size
/// `≥ k^{1/(4d)}` found among the explored blocks.
pub fn depth_exploration(cfg_r: &BoxConfig, truncation: i64, k: usize) -> DepthOutcome {
    let g = cfg_r.geometry();
    let d = g.dim();
    let cfg_n = cfg_r.filter_max_linf(truncation);
    let kk = block_side(k, d);
    let need = (k as f64).powf(1.0 / (4.0 * d as f64));
    let o = g.index_of(&Point::ORIGIN).expect("box contains the origin");
    let mut dist = vec![u32::MAX; cfg_r.num_vertices()];
    dist[o] = 0;
    let mut layers: Vec<Vec<usize>> = vec![vec![o]];
    let mut hit_boundary = g.on_boundary(&Point::ORIGIN);
    for i in 1..=k {
        let mut layer = Vec::new();
        for &v in &layers[i - 1] {
            for &w in cfg_r.neighbors(v) {
                let w = w as usize;
                if dist[w] == u32::MAX {
                    dist[w] = i as u32;
                    layer.push(w);
                    hit_boundary |= g.on_boundary(&cfg_r.point(w));
                }
            }
        }
        layer.sort_unstable();
        if layer.is_empty() {
            break;
        }
        layers.push(layer);
    }
    let ball_size: usize = layers.iter().map(Vec::len).sum();
    let block_of = |p: &Point| -> Point {
        let mut c = [0i64; MAX_DIM];
        for j in 0..d {
            c[j] = p.0[j].div_euclid(kk);
        }
        Point(c)
    };
    let mut seen: BTreeSet<Point> = BTreeSet::new();
    let mut found = false;
    let mut blocks = 0;
    for layer in layers.iter().take(k / 2 + 1) {
        let mut fresh: BTreeMap<Point, usize> = BTreeMap::new();
        for &v in layer {
            let p = cfg_r.point(v);
            let b = block_of(&p);
            if !seen.contains(&b) {
                // vertex indices follow lexicographic order
                fresh.entry(b).or_insert(v);
            }
        }
        for (b, y) in fresh {
            seen.insert(b);
            blocks += 1;
            if found {
                continue;
            }
            let lo = b * kk;
            let mut hi = lo;
            for j in 0..d {
                hi.0[j] += kk - 1;
            }
            let block = LatticeBox::new(d, lo, hi).expect("block");
            let region = VertexSet::from_indices(
                cfg_n.num_vertices(),
                block.points().filter_map(|p| g.index_of(&p)),
            );
            let size = restricted_cluster(&cfg_n, y, &region).map(|c| c.len()).unwrap_or(0);
            if size as f64 >= need {
                found = true;
            }
        }
    }
    DepthOutcome { event: ball_size >= k && !found, ball_size, blocks, hit_boundary }
}

/// `K = ⌈k^{1/(4d)}⌉`.
pub fn block_side(k: usize, dim: usize) -> i64 {
    let x = (k as f64).powf(1.0 / (4.0 * dim as f64));
    let c = x.ceil();
    // guard against 16^{1/8} style rounding just above an integer
    if (x - x.round()).abs() < 1e-12 { x.round() as i64 } else { c as i64 }
}

/// Frequency of `L_k^r(0)` together with exploration diagnostics.
pub fn depth_no_pad_probe(k: &Kernel, beta: f64, params: &DepthParams, replicates: usize, seed: u64) -> Result<DepthProbe> {
    if params.r.is_some_and(|r| r <= params.truncation) || params.truncation < 1 {
        return Err(Error::GeometryInfeasible(format!("need r > N ≥ 1 (r={:?}, N={})", params.r, params.truncation)));
    }
    let d = k.dim();
    let reach = params.r.unwrap_or(params.truncation).max(params.truncation);
    let radius = params.box_radius.unwrap_or(params.k as i64 + 4 * reach);
    let g = LatticeBox::centered(d, radius)?;
    let kernel = match params.r {
        Some(r) => linf_truncation(k, r)?,
        None => k.clone(),
    };
    let plan = SamplePlan::new(EdgeModel::beta_j(kernel, beta)?, g, DEFAULT_MISS_BUDGET)?;
    let outcomes: Vec<DepthOutcome> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let mut cfg = plan.sample(CouplingField::new(derive_seed(seed, rep), STREAM_BASE));
            if let Some(r) = params.r {
                cfg = cfg.filter_max_linf(r);
            }
            depth_exploration(&cfg, params.truncation, params.k)
        })
        .collect();
    let hits: Vec<bool> = outcomes.iter().map(|o| o.event).collect();
    Ok(DepthProbe {
        estimate: Estimate::from_indicators(&hits, seed, "depth_no_pad"),
        block_side: block_side(params.k, d),
        mean_blocks: outcomes.iter().map(|o| o.blocks as f64).sum::<f64>() / replicates.max(1) as f64,
        truncated: outcomes.iter().filter(|o| o.hit_boundary).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_fixtures() {
        let k = Kernel::power_law(2, 1.0, 4.0).unwrap();
        assert_eq!(annulus_pad_probe(&k, 0.0, 9, 1, 1.0, 5, 1).unwrap().value, 0.0);
        assert!(matches!(annulus_pad_probe(&k, 1.0, 6, 2, 1.0, 5, 1), Err(Error::GeometryInfeasible(_))));
        let full = BoxConfig::all_nearest_neighbor(LatticeBox::centered(2, 18).unwrap());
        assert!(annulus_event(&full, &LatticeBox::centered(2, 9).unwrap(), 1));
    }

    #[test]
    fn annulus_monotone_in_beta() {
        let k = Kernel::power_law(2, 1.0, 4.0).unwrap();
        let outer = LatticeBox::centered(2, 12).unwrap();
        let inner = LatticeBox::centered(2, 6).unwrap();
        for seed in 0..10 {
            let hi = crate::sampler::sample_box(&k, 1.5, &outer, CouplingField::new(seed, 0), 1e-3).unwrap();
            let mut prev = false;
            for beta in [0.2, 0.5, 1.0, 1.5] {
                let e = annulus_event(&hi.restrict_beta(beta).unwrap(), &inner, 1);
                assert!(e || !prev, "seed {seed}");
                prev = e;
            }
        }
    }

    #[test]
    fn split_validation() {
        assert!(ExplorationParams::new(1.0, 4, 1, 8, 5).is_ok());
        let p = ExplorationParams::new(1.0, 4, 1, 8, 5).unwrap();
        assert!(matches!(p.clone().with_split(0.5, 0.2), Err(Error::SplitInvalid(_))));
        assert!(p.with_split(0.5, 0.25).is_ok());
        assert!(matches!(ExplorationParams::new(1.0, 4, 5, 8, 5), Err(Error::GeometryInfeasible(_))));
        assert!(matches!(ExplorationParams::new(1.0, 4, 1, 57, 5), Err(Error::GeometryInfeasible(_))));
    }

    #[test]
    fn open_fixture_activates_every_vertex() {
        let params = ExplorationParams::new(1.0, 2, 1, 4, 4).unwrap();
        let src = FixtureStreams { dim: 2, open: [true; 3] };
        let r = explore_with(&src, &params).unwrap();
        assert!(r.survived);
        for (k, level) in r.active.iter().enumerate() {
            assert_eq!(level.len(), k + 1);
        }
        let cert = r.certificate.unwrap();
        assert!(cert.verified);
        assert!(cert.max_edge_linf <= 14 * params.n);
    }

    #[test]
    fn empty_fixtures_die() {
        let params = ExplorationParams::new(1.0, 2, 1, 4, 4).unwrap();
        let r = explore_with(&FixtureStreams { dim: 2, open: [false; 3] }, &params).unwrap();
        assert_eq!(r.survival_depth, None);
        let r = explore_with(&FixtureStreams { dim: 2, open: [true, false, false] }, &params).unwrap();
        assert_eq!(r.survival_depth, Some(0));
        let k = Kernel::power_law(2, 1.0, 4.0).unwrap();
        let zero = ExplorationParams::new(0.0, 3, 1, 6, 3).unwrap();
        assert_eq!(directed_exploration(&k, &zero, 1).unwrap().survival_depth, None);
    }

    #[test]
    fn streams_are_separated_by_step() {
        let k = Kernel::power_law(2, 1.0, 4.0).unwrap();
        let params = ExplorationParams::new(2.0, 3, 1, 12, 4).unwrap();
        for seed in 0..4 {
            let r = directed_exploration(&k, &params, seed).unwrap();
            for a in &r.access_log {
                match a.step {
                    0 => assert_eq!(a.stream, STREAM_BASE),
                    1 => assert!(a.stream == STREAM_BASE || a.stream == STREAM_SPRINKLE_1),
                    _ => assert!(a.stream == STREAM_BASE || a.stream == STREAM_SPRINKLE_2),
                }
            }
            if let Some(c) = r.certificate {
                assert!(c.verified, "seed {seed}");
            }
        }
    }

    #[test]
    fn directed_fixtures() {
        let one = DirectedModel::uniform(1.0).unwrap();
        assert_eq!(directed_survival(&one, 30, 20, 1).value, 1.0);
        let lv = directed_run(&one, 5, 3);
        for (k, l) in lv.iter().enumerate() {
            assert_eq!(l.len(), k + 1);
        }
        let zero = DirectedModel::uniform(0.0).unwrap();
        assert!(directed_run(&zero, 5, 3)[1].is_empty());
        assert!(DirectedModel::new(0.5, 0.4, 0.9).is_err());
    }

    #[test]
    fn exact_width_one_is_geometric() {
        let m = DirectedModel::uniform(0.7).unwrap().with_width(1);
        let got = directed_survival_exact(&m, 10).unwrap();
        assert!((got - 0.7f64.powi(10)).abs() < 1e-15);
    }

    #[test]
    fn exact_matches_brute_force_width_two() {
        // enumerate all uniforms' outcomes for two columns by hand: state {0,1}
        let q = 0.6;
        let m = DirectedModel::uniform(q).unwrap().with_width(2);
        // level 1 from {0}: column 0 via e_2 (q), column 1 via e_1 (q)
        let mut states = [0.0f64; 4];
        states[1] = q * (1.0 - q);
        states[2] = (1.0 - q) * q;
        states[3] = q * q;
        // level 2: each column with an active left or lower neighbour opens with q
        let mut next = [0.0f64; 4];
        for (s, &mass) in states.iter().enumerate() {
            let e0 = s & 1 == 1;
            let e1 = s != 0;
            for t in 0..4usize {
                let c0 = t & 1 == 1;
                let c1 = t & 2 == 2;
                if (c0 && !e0) || (c1 && !e1) {
                    continue;
                }
                let f = |eligible: bool, on: bool| if !eligible { 1.0 } else if on { q } else { 1.0 - q };
                next[t] += mass * f(e0, c0) * f(e1, c1);
            }
        }
        let want = next[1] + next[2] + next[3];
        assert!((directed_survival_exact(&m, 2).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn mc_matches_exact_recursion() {
        let m = DirectedModel::uniform(0.9).unwrap().with_width(4);
        let exact = directed_survival_exact(&m, 40).unwrap();
        let est = directed_survival(&m, 40, 4000, 5);
        assert!(est.agrees_with(exact, 4.0), "{est:?} vs {exact}");
    }

    #[test]
    fn depth_fixtures() {
        assert_eq!(block_side(16, 2), 2);
        assert_eq!(block_side(256, 2), 2);
        assert_eq!(block_side(257, 2), 3);
        let g = LatticeBox::centered(2, 20).unwrap();
        let empty = depth_exploration(&BoxConfig::empty(g), 2, 16);
        assert!(!empty.event);
        assert_eq!(empty.ball_size, 1);
        let full = depth_exploration(&BoxConfig::all_nearest_neighbor(g), 2, 16);
        assert!(!full.event);
        assert!(full.ball_size >= 16);
        let k = Kernel::power_law(2, 1.0, 5.0).unwrap();
        let p = DepthParams { r: Some(2), truncation: 3, k: 16, box_radius: None };
        assert!(matches!(depth_no_pad_probe(&k, 1.0, &p, 4, 1), Err(Error::GeometryInfeasible(_))));
    }
}
