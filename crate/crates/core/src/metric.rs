//! Chemical distances and the projected pseudometric `D̂`.
//!
//! The infinite cluster is represented in finite volume by an
//! [`InfiniteClusterProxy`]: by default the largest cluster of a configuration
//! sampled on an enlarged box, intersected with the working box. Real points
//! are rounded to the lattice by the half-open cell rule
//! `x ∈ x_d + [−½, ½)^d`, then projected to the nearest proxy vertex in
//! sup-norm with lexicographic tie-breaking.

use crate::cluster::components;
use crate::coupling::{derive_seed, CouplingField};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lattice::{LatticeBox, Point, VertexSet, MAX_DIM};
use crate::sampler::{BoxConfig, EdgeModel, SamplePlan};
use crate::stats::mean_and_stderr;
use serde::Serialize;
use std::collections::VecDeque;

/// Hop count sentinel for unreachable vertices.
pub const UNREACHABLE: u32 = u32::MAX;

/// Hop distances from a source set.
#[derive(Clone, Debug)]
pub struct DistanceField {
    sources: Vec<usize>,
    dist: Vec<u32>,
}

impl DistanceField {
    /// `Some(hops)` or `None` when unreachable.
    #[inline]
    pub fn get(&self, v: usize) -> Option<u32> {
        let d = self.dist[v];
        (d != UNREACHABLE).then_some(d)
    }

    pub fn raw(&self) -> &[u32] {
        &self.dist
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }
}

/// BFS with unit cost per open edge.
pub fn bfs_distances(cfg: &BoxConfig, sources: &[usize]) -> Result<DistanceField> {
    if sources.is_empty() {
        return Err(Error::EmptySources);
    }
    let n = cfg.num_vertices();
    if sources.iter().any(|&s| s >= n) {
        return Err(Error::SourceOutsideSet);
    }
    let mut dist = vec![UNREACHABLE; n];
    let mut queue = VecDeque::with_capacity(1024);
    for &s in sources {
        if dist[s] != 0 {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        let dv = dist[v] + 1;
        for &w in cfg.neighbors(v) {
            let w = w as usize;
            if dist[w] == UNREACHABLE {
                dist[w] = dv;
                queue.push_back(w);
            }
        }
    }
    let mut sources = sources.to_vec();
    sources.sort_unstable();
    sources.dedup();
    Ok(DistanceField { sources, dist })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProxyRule {
    /// Largest cluster of the sampled box, restricted to the working box.
    LargestCluster,
    /// Clusters of working-box vertices that reach the boundary of the sampled box.
    BoundaryTouching,
    /// Hand-picked vertex set.
    Explicit,
}

/// Finite-volume stand-in for the infinite cluster.
#[derive(Clone, Debug)]
pub struct InfiniteClusterProxy {
    rule: ProxyRule,
    working: LatticeBox,
    members: VertexSet,
}

impl InfiniteClusterProxy {
    pub fn largest_cluster(cfg: &BoxConfig, working: &LatticeBox) -> Result<InfiniteClusterProxy> {
        check_working(cfg, working)?;
        let forest = components(cfg);
        let (_, rep) = forest.largest();
        let root = forest.root(rep);
        let inside = VertexSet::from_subbox(cfg.geometry(), working);
        let members = VertexSet::from_indices(
            cfg.num_vertices(),
            inside.members().iter().map(|&v| v as usize).filter(|&v| forest.root(v) == root),
        );
        Ok(InfiniteClusterProxy { rule: ProxyRule::LargestCluster, working: *working, members })
    }

    pub fn boundary_touching(cfg: &BoxConfig, working: &LatticeBox) -> Result<InfiniteClusterProxy> {
        check_working(cfg, working)?;
        let forest = components(cfg);
        let g = cfg.geometry();
        let mut touching = vec![false; cfg.num_vertices()];
        for (v, p) in g.points().enumerate() {
            if g.on_boundary(&p) {
                touching[forest.root(v)] = true;
            }
        }
        let inside = VertexSet::from_subbox(g, working);
        let members = VertexSet::from_indices(
            cfg.num_vertices(),
            inside.members().iter().map(|&v| v as usize).filter(|&v| touching[forest.root(v)]),
        );
        Ok(InfiniteClusterProxy { rule: ProxyRule::BoundaryTouching, working: *working, members })
    }

    pub fn explicit(cfg: &BoxConfig, working: &LatticeBox, points: &[Point]) -> Result<InfiniteClusterProxy> {
        check_working(cfg, working)?;
        let mut idx = Vec::new();
        for p in points {
            if !working.contains(p) {
                return Err(Error::SourceOutsideSet);
            }
            idx.push(cfg.index(p).expect("inside working box"));
        }
        Ok(InfiniteClusterProxy {
            rule: ProxyRule::Explicit,
            working: *working,
            members: VertexSet::from_indices(cfg.num_vertices(), idx),
        })
    }

    pub fn rule(&self) -> ProxyRule {
        self.rule
    }

    pub fn working(&self) -> &LatticeBox {
        &self.working
    }

    pub fn members(&self) -> &VertexSet {
        &self.members
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.contains(v)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn check_working(cfg: &BoxConfig, working: &LatticeBox) -> Result<()> {
    if !cfg.geometry().contains_box(working) {
        return Err(Error::GeometryInfeasible("working box must lie inside the sampled box".into()));
    }
    Ok(())
}

/// Lattice point `x_d` with `x ∈ x_d + [−½, ½)^d`.
pub fn round_to_lattice(x: &[f64]) -> Point {
    let mut c = [0i64; MAX_DIM];
    for (i, v) in x.iter().enumerate() {
        c[i] = (v + 0.5).floor() as i64;
    }
    Point(c)
}

/// Nearest proxy vertex to a lattice point in sup-norm, lexicographic ties.
pub fn hat_vertex(cfg: &BoxConfig, proxy: &InfiniteClusterProxy, x: &Point) -> Result<usize> {
    if proxy.is_empty() {
        return Err(Error::EmptyProxy);
    }
    let g = cfg.geometry();
    let d = g.dim();
    x.check_dim(d)?;
    if let Some(i) = g.index_of(x) {
        if proxy.contains(i) {
            return Ok(i);
        }
    }
    // distance to the farthest corner bounds the search
    let w = proxy.working();
    let mut rmax = 0;
    for i in 0..d {
        rmax = rmax.max((x.0[i] - w.lo().0[i]).abs()).max((x.0[i] - w.hi().0[i]).abs());
    }
    for r in 1..=rmax {
        let Ok(shell_box) = LatticeBox::ball(d, *x, r) else { break };
        let Some(search) = shell_box.intersect(w) else { continue };
        for p in search.points() {
            if (p - *x).linf() != r {
                continue;
            }
            let i = g.index_of(&p).expect("inside");
            if proxy.contains(i) {
                return Ok(i);
            }
        }
    }
    Err(Error::EmptyProxy)
}

/// `x̂` for a real point.
pub fn hat_point(cfg: &BoxConfig, proxy: &InfiniteClusterProxy, x: &[f64]) -> Result<usize> {
    if x.len() != cfg.dim() {
        return Err(Error::DimensionMismatch { expected: cfg.dim(), got: x.len() });
    }
    hat_vertex(cfg, proxy, &round_to_lattice(x))
}

/// `D̂(x, y) = D(x̂, ŷ)`; `None` when the projections lie in different clusters.
pub fn dhat(cfg: &BoxConfig, proxy: &InfiniteClusterProxy, x: &Point, y: &Point) -> Result<Option<u32>> {
    let hx = hat_vertex(cfg, proxy, x)?;
    let hy = hat_vertex(cfg, proxy, y)?;
    if hx == hy {
        return Ok(Some(0));
    }
    Ok(bfs_distances(cfg, &[hx])?.get(hy))
}

/// Projection of every working-box vertex, indexed by configuration vertex.
pub fn projection_map(cfg: &BoxConfig, proxy: &InfiniteClusterProxy) -> Result<Vec<(usize, usize)>> {
    proxy
        .working()
        .points()
        .map(|p| Ok((cfg.index(&p).expect("inside"), hat_vertex(cfg, proxy, &p)?)))
        .collect()
}

/// `B̂_t(center)`: working-box vertices `z` with `D̂(z, center) ≤ t`.
pub fn chemical_ball(cfg: &BoxConfig, proxy: &InfiniteClusterProxy, center: &Point, t: u32) -> Result<Vec<usize>> {
    let c = hat_vertex(cfg, proxy, center)?;
    let dist = bfs_distances(cfg, &[c])?;
    let mut out: Vec<usize> = projection_map(cfg, proxy)?
        .into_iter()
        .filter(|&(_, h)| dist.get(h).is_some_and(|d| d <= t))
        .map(|(z, _)| z)
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Largest finite chemical distance between two vertices of `set`, with an
/// attaining pair; `(0, None)` when no two vertices share a cluster.
pub fn max_cluster_distance(cfg: &BoxConfig, set: &VertexSet) -> (u32, Option<(usize, usize)>) {
    let forest = components(cfg);
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for &v in set.members() {
        groups.entry(forest.root(v as usize)).or_default().push(v as usize);
    }
    let mut best = (0u32, None);
    let mut local = vec![u32::MAX; cfg.num_vertices()];
    for (_, g) in groups {
        if g.len() < 2 {
            continue;
        }
        let (d, pair) = subset_diameter(cfg, &g, &mut local);
        if d > best.0 {
            best = (d, pair);
        }
    }
    best
}

/// Exact `max_{a,b ∈ S} D(a,b)` for a set inside one cluster, using
/// eccentricity bounds to avoid a BFS from every vertex.
fn subset_diameter(cfg: &BoxConfig, s: &[usize], local: &mut [u32]) -> (u32, Option<(usize, usize)>) {
    for (i, &v) in s.iter().enumerate() {
        local[v] = i as u32;
    }
    let k = s.len();
    let mut lower = vec![0u32; k];
    let mut upper = vec![u32::MAX; k];
    let mut active = vec![true; k];
    let mut best = 0u32;
    let mut pair = None;
    let mut pick_high = true;
    loop {
        let cand = (0..k).filter(|&i| active[i]);
        let next = if pick_high {
            cand.max_by_key(|&i| (upper[i], std::cmp::Reverse(i)))
        } else {
            cand.min_by_key(|&i| (lower[i], i))
        };
        let Some(i) = next else { break };
        pick_high = !pick_high;
        active[i] = false;
        let dist = bfs_distances(cfg, &[s[i]]).expect("valid source");
        let mut ecc = 0u32;
        let mut far = s[i];
        for &w in s {
            let dw = dist.raw()[w];
            if dw != UNREACHABLE && dw > ecc {
                ecc = dw;
                far = w;
            }
        }
        if ecc > best {
            best = ecc;
            pair = Some((s[i].min(far), s[i].max(far)));
        }
        for (j, &w) in s.iter().enumerate() {
            let dw = dist.raw()[w];
            lower[j] = lower[j].max(dw).max(ecc.saturating_sub(dw));
            upper[j] = upper[j].min(ecc.saturating_add(dw));
            if upper[j] <= best {
                active[j] = false;
            }
        }
    }
    for &v in s {
        local[v] = u32::MAX;
    }
    (best, pair)
}

/// One replicate of the `D̂(0, n x)` experiment.
#[derive(Clone, Debug, Serialize)]
pub struct MuReplicate {
    pub n: i64,
    pub replicate: u64,
    pub seed: u64,
    pub d_0_n: u32,
    pub d_n_2n: u32,
    pub d_0_2n: u32,
    pub subadditive: bool,
}

/// Summary of `D̂(0, n x)/n` over replicates for one `n`.
#[derive(Clone, Debug, Serialize)]
pub struct MuRow {
    pub n: i64,
    pub mean: f64,
    pub stderr: f64,
    pub subadditivity_violations: usize,
    pub used: usize,
    pub empty_proxy: usize,
    pub replicates: Vec<MuReplicate>,
}

/// Geometry used for one `n`: working radius and enlarged (sampled) radius.
pub fn mu_geometry(direction: &Point, n: i64) -> (i64, i64) {
    let reach = 2 * n * direction.linf();
    let working = reach + reach / 4 + 2;
    (working, working + (working + 1) / 2)
}

/// `D̂(0, n x)/n` for each `n`, with the subadditivity check
/// `D̂(0, 2nx) ≤ D̂(0, nx) + D̂(nx, 2nx)` in each configuration.
pub fn mu_sequence(
    k: &Kernel,
    beta: f64,
    direction: &Point,
    n_values: &[i64],
    replicates: usize,
    seed: u64,
    miss_budget: f64,
) -> Result<Vec<MuRow>> {
    let d = k.dim();
    let mut plans = std::collections::BTreeMap::new();
    for &n in n_values {
        let (_, big) = mu_geometry(direction, n);
        if let std::collections::btree_map::Entry::Vacant(e) = plans.entry(n) {
            let g = LatticeBox::centered(d, big)?;
            e.insert(SamplePlan::new(EdgeModel::beta_j(k.clone(), beta)?, g, miss_budget)?);
        }
    }
    mu_sequence_with(d, direction, n_values, replicates, seed, |n, s| {
        Ok(plans[&n].sample(CouplingField::new(s, 0)))
    })
}

/// [`mu_sequence`] with a caller-supplied configuration source
/// `(n, replicate seed) → configuration on the enlarged box`.
pub fn mu_sequence_with(
    dim: usize,
    direction: &Point,
    n_values: &[i64],
    replicates: usize,
    seed: u64,
    source: impl Fn(i64, u64) -> Result<BoxConfig> + Sync,
) -> Result<Vec<MuRow>> {
    use rayon::prelude::*;
    direction.check_dim(dim)?;
    if direction.is_origin() {
        return Err(Error::ZeroDisplacement);
    }
    let mut rows = Vec::new();
    for (ni, &n) in n_values.iter().enumerate() {
        let (working_r, _) = mu_geometry(direction, n);
        let working = LatticeBox::centered(dim, working_r)?;
        let results: Vec<Result<Option<MuReplicate>>> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let s = derive_seed(seed, (ni as u64) << 32 | r);
                let cfg = source(n, s)?;
                let proxy = InfiniteClusterProxy::largest_cluster(&cfg, &working)?;
                if proxy.is_empty() {
                    return Ok(None);
                }
                let x0 = Point::ORIGIN;
                let x1 = *direction * n;
                let x2 = *direction * (2 * n);
                let h0 = hat_vertex(&cfg, &proxy, &x0)?;
                let h1 = hat_vertex(&cfg, &proxy, &x1)?;
                let h2 = hat_vertex(&cfg, &proxy, &x2)?;
                let f0 = bfs_distances(&cfg, &[h0])?;
                let f1 = bfs_distances(&cfg, &[h1])?;
                let (Some(a), Some(b), Some(c)) = (f0.get(h1), f1.get(h2), f0.get(h2)) else {
                    return Ok(None);
                };
                Ok(Some(MuReplicate { n, replicate: r, seed: s, d_0_n: a, d_n_2n: b, d_0_2n: c, subadditive: c <= a + b }))
            })
            .collect();
        let mut reps = Vec::new();
        let mut empty = 0;
        for r in results {
            match r? {
                Some(m) => reps.push(m),
                None => empty += 1,
            }
        }
        if 2 * empty > replicates {
            return Err(Error::SubcriticalRegime(format!("proxy empty in {empty} of {replicates} replicates at n={n}")));
        }
        let ratios: Vec<f64> = reps.iter().map(|m| m.d_0_n as f64 / n as f64).collect();
        let (mean, stderr) = mean_and_stderr(&ratios);
        rows.push(MuRow {
            n,
            mean,
            stderr,
            subadditivity_violations: reps.iter().filter(|m| !m.subadditive).count(),
            used: reps.len(),
            empty_proxy: empty,
            replicates: reps,
        });
    }
    Ok(rows)
}

/// Norm values on a finite set of directions, extended to all of R^d through
/// the symmetrized convex hull of the points `u/μ(u)`.
#[derive(Clone, Debug)]
pub struct MuTable {
    dim: usize,
    entries: Vec<(Point, f64)>,
    facets: Vec<Vec<f64>>,
}

impl MuTable {
    pub fn new(dim: usize, entries: Vec<(Point, f64)>) -> Result<MuTable> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter("norm tables support d ≤ 3".into()));
        }
        if entries.is_empty() {
            return Err(Error::DegenerateNorm("empty table".into()));
        }
        for (u, m) in &entries {
            u.check_dim(dim)?;
            if u.is_origin() {
                return Err(Error::ZeroDisplacement);
            }
            if !(*m > 0.0) || !m.is_finite() {
                return Err(Error::DegenerateNorm(format!("μ{u:?} = {m}")));
            }
        }
        let mut verts: Vec<Vec<f64>> = Vec::new();
        for (u, m) in &entries {
            for img in symmetry_images(u, dim) {
                let v: Vec<f64> = img.coords(dim).iter().map(|&c| c as f64 / m).collect();
                if !verts.iter().any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-15)) {
                    verts.push(v);
                }
            }
        }
        let facets = hull_facets(dim, &verts);
        if facets.is_empty() {
            return Err(Error::DegenerateNorm("directions do not span R^d".into()));
        }
        Ok(MuTable { dim, entries, facets })
    }

    /// Sup-norm: `μ(e_i) = 1`, `μ(1,…,1) = 1`.
    pub fn sup_norm(dim: usize) -> MuTable {
        let mut e: Vec<(Point, f64)> = (0..dim).map(|i| (Point::unit(i), 1.0)).collect();
        e.push((Point::new(&vec![1; dim]), 1.0));
        MuTable::new(dim, e).expect("valid table")
    }

    pub fn entries(&self) -> &[(Point, f64)] {
        &self.entries
    }

    /// Gauge of the interpolated unit ball.
    pub fn gauge(&self, z: &[f64]) -> f64 {
        self.facets
            .iter()
            .map(|a| a.iter().zip(z).map(|(x, y)| x * y).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest sup-norm of a point with gauge one.
    pub fn reach(&self) -> f64 {
        self.entries.iter().map(|(u, m)| u.linf() as f64 / m).fold(0.0, f64::max)
    }
}

fn symmetry_images(u: &Point, dim: usize) -> Vec<Point> {
    let mut perms = Vec::new();
    permute(&mut u.coords(dim).to_vec(), 0, &mut perms);
    let mut out = Vec::new();
    for p in perms {
        for signs in 0..(1 << dim) {
            let c: Vec<i64> = p.iter().enumerate().map(|(i, &x)| if signs >> i & 1 == 1 { -x } else { x }).collect();
            let q = Point::new(&c);
            if !out.contains(&q) {
                out.push(q);
            }
        }
    }
    out
}

fn permute(v: &mut Vec<i64>, k: usize, out: &mut Vec<Vec<i64>>) {
    if k == v.len() {
        out.push(v.clone());
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, out);
        v.swap(k, i);
    }
}

/// Facet normals `a` (with `a·y ≤ 1` on the hull) of a centrally symmetric
/// polytope given by its candidate vertices, found by brute force.
fn hull_facets(dim: usize, verts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut facets: Vec<Vec<f64>> = Vec::new();
    let mut push = |a: Vec<f64>| {
        if verts.iter().all(|v| dot(&a, v) <= 1.0 + 1e-12)
            && !facets.iter().any(|f| f.iter().zip(&a).all(|(x, y)| (x - y).abs() < 1e-12))
        {
            facets.push(a);
        }
    };
    match dim {
        1 => {
            let r = verts.iter().map(|v| v[0].abs()).fold(0.0, f64::max);
            push(vec![1.0 / r]);
            push(vec![-1.0 / r]);
        }
        2 => {
            for i in 0..verts.len() {
                for j in i + 1..verts.len() {
                    if let Some(a) = solve(&[verts[i].clone(), verts[j].clone()]) {
                        push(a);
                    }
                }
            }
        }
        _ => {
            for i in 0..verts.len() {
                for j in i + 1..verts.len() {
                    for k in j + 1..verts.len() {
                        if let Some(a) = solve(&[verts[i].clone(), verts[j].clone(), verts[k].clone()]) {
                            push(a);
                        }
                    }
                }
            }
        }
    }
    facets
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `M a = 1` for a square system by Gaussian elimination.
fn solve(rows: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut m: Vec<Vec<f64>> = rows.iter().map(|r| {
        let mut r = r.clone();
        r.push(1.0);
        r
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-12 {
            return None;
        }
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Outcome of a shape inclusion check.
#[derive(Clone, Debug, Serialize)]
pub struct ShapeReport {
    pub passes: bool,
    /// `max_{z ∈ ball} μ(z)/t − 1`.
    pub outer_excess: f64,
    /// `max_{z ∉ ball} (1 − μ(z)/t)` over lattice points inside the gauge ball.
    pub inner_deficit: f64,
    /// Smallest `ε ≥ 0` for which both inclusions hold.
    pub magnitude: f64,
    pub worst_outer: Option<Point>,
    pub worst_inner: Option<Point>,
}

/// Checks `(1−ε) B_μ ⊂ B̂_t/t ⊂ (1+ε) B_μ` for a ball given as lattice points
/// relative to its centre. Membership is only known inside `domain`.
pub fn shape_check(ball: &[Point], t: u32, mu: &MuTable, eps: f64, domain: &LatticeBox) -> Result<ShapeReport> {
    if t == 0 {
        return Err(Error::InvalidParameter("t must be positive".into()));
    }
    let d = mu.dim;
    let tf = t as f64;
    let mut outer = f64::NEG_INFINITY;
    let mut worst_outer = None;
    let set: std::collections::HashSet<Point> = ball.iter().copied().collect();
    for z in ball {
        let g = mu.gauge(&z.as_f64(d)) / tf - 1.0;
        if g > outer {
            outer = g;
            worst_outer = Some(*z);
        }
    }
    let reach = (mu.reach() * tf).ceil() as i64;
    let region = LatticeBox::centered(d, reach)?;
    if !domain.contains_box(&region) {
        return Err(Error::GeometryInfeasible(format!(
            "inner check needs sup-radius {reach} but the domain is {domain:?}"
        )));
    }
    let mut inner = f64::NEG_INFINITY;
    let mut worst_inner = None;
    for z in region.points() {
        let g = mu.gauge(&z.as_f64(d)) / tf;
        if g <= 1.0 && !set.contains(&z) && 1.0 - g > inner {
            inner = 1.0 - g;
            worst_inner = Some(z);
        }
    }
    let passes = outer <= eps + 1e-12 && (inner < eps - 1e-12 || worst_inner.is_none());
    let magnitude = outer.max(inner).max(0.0);
    Ok(ShapeReport { passes, outer_excess: outer, inner_deficit: inner, magnitude, worst_outer, worst_inner })
}

/// One configuration of the shape experiment: `B̂_t(0)` in the largest
/// cluster of an enlarged box, checked against `t·B_μ` with tolerance `eps`.
pub fn shape_replicate(
    k: &Kernel,
    beta: f64,
    mu: &MuTable,
    t: u32,
    eps: f64,
    seed: u64,
    miss_budget: f64,
) -> Result<ShapeReport> {
    let d = k.dim();
    let working = (mu.reach() * t as f64).ceil() as i64 + 2;
    let enlarged = working + (working + 1) / 2;
    let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), beta)?, LatticeBox::centered(d, enlarged)?, miss_budget)?;
    let cfg = plan.sample(CouplingField::new(seed, 0));
    let wbox = LatticeBox::centered(d, working)?;
    let proxy = InfiniteClusterProxy::largest_cluster(&cfg, &wbox)?;
    if proxy.is_empty() {
        return Err(Error::EmptyProxy);
    }
    let ball: Vec<Point> = chemical_ball(&cfg, &proxy, &Point::ORIGIN, t)?.into_iter().map(|v| cfg.point(v)).collect();
    shape_check(&ball, t, mu, eps, &wbox)
}
