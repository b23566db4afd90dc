//! Finite-volume configurations.
//!
//! A [`SamplePlan`] fixes the geometry, the edge model and the displacement
//! cutoff once; [`SamplePlan::sample`] then materializes the open edges for any
//! coupling field. Each open edge keeps its uniform so that lowering `β`,
//! truncating, or filtering by sup-norm length reproduces exactly what direct
//! sampling would give.

use crate::coupling::{CouplingField, DisplacementTree};
use crate::error::{Error, Result};
use crate::kernel::{check_beta, open_prob_from_weight, Kernel, ShortEdgeFunction, ShortRule};
use crate::lattice::{LatticeBox, Point, MAX_DIM};
use std::fmt::Write as _;

pub const DEFAULT_MISS_BUDGET: f64 = 1e-3;
/// Budget small enough that every displacement fitting in the box is enumerated.
pub const EXHAUSTIVE_BUDGET: f64 = f64::MIN_POSITIVE;
const MAX_DISPLACEMENTS: usize = 50_000_000;

/// The two edge laws supported by the sampler.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeModel {
    /// Edge with displacement `x` opens with probability `1 − e^{−βJ(x)}`.
    BetaJ { kernel: Kernel, beta: f64 },
    /// Nearest-neighbour edges open with probability `p`, others with `f(x)`.
    ShortEdge(ShortEdgeFunction),
}

impl EdgeModel {
    pub fn beta_j(kernel: Kernel, beta: f64) -> Result<EdgeModel> {
        check_beta(beta)?;
        Ok(EdgeModel::BetaJ { kernel, beta })
    }

    pub fn dim(&self) -> usize {
        match self {
            EdgeModel::BetaJ { kernel, .. } => kernel.dim(),
            EdgeModel::ShortEdge(sf) => sf.dim(),
        }
    }

    pub(crate) fn prob_class(&self, class: &Point) -> f64 {
        match self {
            EdgeModel::BetaJ { kernel, beta } => open_prob_from_weight(*beta, kernel.eval_class(class)),
            EdgeModel::ShortEdge(sf) => sf.open_probability_class(class),
        }
    }

    /// Opening probability for displacement `v`.
    pub fn probability(&self, v: &Point) -> Result<f64> {
        match self {
            EdgeModel::BetaJ { kernel, beta } => kernel.open_probability(*beta, v),
            EdgeModel::ShortEdge(sf) => sf.open_probability(v),
        }
    }

    /// Upper bounds on `Σ_{|x|_∞ > L} P(edge 0x open)` for `L = 0..=lmax`.
    fn tail_profile(&self, lmax: i64) -> Result<Vec<f64>> {
        match self {
            EdgeModel::BetaJ { kernel, beta } => {
                Ok(kernel.linf_tail_profile(lmax)?.into_iter().map(|t| beta * t).collect())
            }
            EdgeModel::ShortEdge(sf) => match sf.rule() {
                ShortRule::Zero => Ok(vec![0.0; lmax as usize + 1]),
                ShortRule::PowerLaw { gamma, exponent } => {
                    let d = sf.dim();
                    let k = Kernel::power_law(d, *gamma, *exponent)?;
                    let mut prof = k.linf_tail_profile(lmax)?;
                    prof[0] = (prof[0] - 2.0 * d as f64 * gamma).max(0.0);
                    Ok(prof)
                }
                ShortRule::FromKernel { kernel, beta } => {
                    Ok(kernel.linf_tail_profile(lmax)?.into_iter().map(|t| beta * t).collect())
                }
                ShortRule::Splice { .. } => (0..=lmax).map(|l| sf.linf_tail(l)).collect(),
            },
        }
    }

    fn is_trivial(&self) -> bool {
        match self {
            EdgeModel::BetaJ { beta, .. } => *beta == 0.0,
            EdgeModel::ShortEdge(_) => false,
        }
    }

    fn support_linf(&self) -> Option<i64> {
        match self {
            EdgeModel::BetaJ { kernel, .. } => kernel.support_linf(),
            EdgeModel::ShortEdge(sf) => match sf.rule() {
                ShortRule::Zero => Some(1),
                ShortRule::FromKernel { kernel, .. } => kernel.support_linf().map(|s| s.max(1)),
                _ => None,
            },
        }
    }

    /// Text form used in configuration headers.
    pub fn spec(&self) -> String {
        match self {
            EdgeModel::BetaJ { kernel, beta } => format!("model=betaj beta={beta} kernel={kernel}"),
            EdgeModel::ShortEdge(sf) => format!("model=pf spec={sf}"),
        }
    }
}

/// One sampled layer of a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub stream: u8,
    pub model: EdgeModel,
}

/// Everything needed to regenerate a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub layers: Vec<Layer>,
    pub miss_budget: f64,
    /// Largest sup-norm displacement enumerated.
    pub cutoff: i64,
    /// Expected number of open edges skipped beyond the cutoff (upper bound).
    pub miss_bound: f64,
    /// Sup-norm length filter applied after sampling, if any.
    pub max_linf: Option<i64>,
    /// Hand-built configurations carry no random layers.
    pub fixture: bool,
}

impl Provenance {
    fn fixture() -> Provenance {
        Provenance {
            seed: 0,
            layers: Vec::new(),
            miss_budget: DEFAULT_MISS_BUDGET,
            cutoff: 0,
            miss_bound: 0.0,
            max_linf: None,
            fixture: true,
        }
    }
}

#[derive(Clone, Debug)]
struct PlannedDisplacement {
    v: Point,
    p: f64,
}

/// Precomputed enumeration plan for one geometry and one edge model.
#[derive(Clone, Debug)]
pub struct SamplePlan {
    geometry: LatticeBox,
    model: EdgeModel,
    displacements: Vec<PlannedDisplacement>,
    cutoff: i64,
    miss_bound: f64,
    miss_budget: f64,
}

impl SamplePlan {
    pub fn new(model: EdgeModel, geometry: LatticeBox, miss_budget: f64) -> Result<SamplePlan> {
        let d = geometry.dim();
        if model.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: model.dim() });
        }
        if !(miss_budget > 0.0 && miss_budget <= 1.0) {
            return Err(Error::InvalidParameter(format!("miss budget must lie in (0,1], got {miss_budget}")));
        }
        let maxspan = (0..d).map(|i| geometry.side(i) - 1).max().unwrap_or(0);
        let (cutoff, miss_bound) = if model.is_trivial() || maxspan == 0 {
            (0, 0.0)
        } else if let Some(s) = model.support_linf().filter(|&s| s <= maxspan) {
            (s, 0.0)
        } else {
            let profile = model.tail_profile(maxspan)?;
            let vol = geometry.volume() as f64;
            match profile.iter().position(|&t| vol * t < miss_budget) {
                Some(l) if (l as i64) < maxspan => (l as i64, vol * profile[l]),
                _ => (maxspan, 0.0),
            }
        };
        let mut span = [0i64; MAX_DIM];
        let mut count: u128 = 1;
        for (i, s) in span.iter_mut().enumerate().take(d) {
            *s = cutoff.min(geometry.side(i) - 1);
            count *= (2 * *s + 1) as u128;
        }
        if count / 2 > MAX_DISPLACEMENTS as u128 {
            return Err(Error::BudgetInfeasible(format!(
                "{} displacement classes needed for cutoff {cutoff}",
                count / 2
            )));
        }
        let mut displacements = Vec::new();
        let window = LatticeBox::new(d, -Point(span), Point(span))?;
        for v in window.points() {
            if !v.is_lex_positive() {
                continue;
            }
            let p = model.prob_class(&v.canonical_class(d));
            if p > 0.0 {
                displacements.push(PlannedDisplacement { v, p });
            }
        }
        Ok(SamplePlan { geometry, model, displacements, cutoff, miss_bound, miss_budget })
    }

    /// The same plan on a translate of its box. Displacement lists depend only
    /// on box shape, so this skips the planning work.
    pub fn translated(&self, offset: &Point) -> Result<SamplePlan> {
        let d = self.geometry.dim();
        offset.check_dim(d)?;
        let mut plan = self.clone();
        plan.geometry = LatticeBox::new(d, self.geometry.lo() + *offset, self.geometry.hi() + *offset)?;
        Ok(plan)
    }

    pub fn geometry(&self) -> &LatticeBox {
        &self.geometry
    }

    pub fn model(&self) -> &EdgeModel {
        &self.model
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    pub fn miss_bound(&self) -> f64 {
        self.miss_bound
    }

    /// Open edges `(a, b, U)` with `a < b` in vertex-index order.
    fn raw_edges(&self, field: CouplingField, out: &mut Vec<(u32, u32, f64)>) {
        let g = &self.geometry;
        let d = g.dim();
        for pd in &self.displacements {
            let mut lo = g.lo();
            let mut hi = g.hi();
            let mut empty = false;
            for i in 0..d {
                let v = pd.v.0[i];
                if v >= 0 {
                    hi.0[i] -= v;
                } else {
                    lo.0[i] -= v;
                }
                empty |= lo.0[i] > hi.0[i];
            }
            if empty {
                continue;
            }
            let tree = DisplacementTree::new(field, &pd.v, d);
            tree.enumerate(&lo, &hi, pd.p, &mut |base, u| {
                let a = g.index_of(&base).expect("base inside box") as u32;
                let b = g.index_of(&(base + pd.v)).expect("endpoint inside box") as u32;
                out.push((a, b, u));
            });
        }
    }

    /// Samples one configuration from `field`.
    pub fn sample(&self, field: CouplingField) -> BoxConfig {
        let mut raw = Vec::new();
        self.raw_edges(field, &mut raw);
        let prov = Provenance {
            seed: field.seed,
            layers: vec![Layer { stream: field.stream, model: self.model.clone() }],
            miss_budget: self.miss_budget,
            cutoff: self.cutoff,
            miss_bound: self.miss_bound,
            max_linf: None,
            fixture: false,
        };
        BoxConfig::build(self.geometry, raw, true, prov)
    }
}

/// `ω` restricted to a box for the `βJ` model.
pub fn sample_box(
    k: &Kernel,
    beta: f64,
    geometry: &LatticeBox,
    field: CouplingField,
    miss_budget: f64,
) -> Result<BoxConfig> {
    let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), beta)?, *geometry, miss_budget)?;
    Ok(plan.sample(field))
}

/// `ω` restricted to a box for the `(p, f)` model.
pub fn sample_box_pf(
    sf: &ShortEdgeFunction,
    geometry: &LatticeBox,
    field: CouplingField,
    miss_budget: f64,
) -> Result<BoxConfig> {
    let plan = SamplePlan::new(EdgeModel::ShortEdge(sf.clone()), *geometry, miss_budget)?;
    Ok(plan.sample(field))
}

/// Union of independent layers sharing one seed, e.g. `ω_β̃ ∨ ω'_η ∨ ω''_η`.
pub fn sample_layers(
    geometry: &LatticeBox,
    seed: u64,
    layers: &[Layer],
    miss_budget: f64,
) -> Result<BoxConfig> {
    for (i, a) in layers.iter().enumerate() {
        if layers[..i].iter().any(|b| b.stream == a.stream) {
            return Err(Error::SameStream);
        }
    }
    let mut raw = Vec::new();
    let mut cutoff = 0;
    let mut bound = 0.0;
    for layer in layers {
        let plan = SamplePlan::new(layer.model.clone(), *geometry, miss_budget)?;
        plan.raw_edges(CouplingField::new(seed, layer.stream), &mut raw);
        cutoff = cutoff.max(plan.cutoff);
        bound += plan.miss_bound;
    }
    let prov = Provenance {
        seed,
        layers: layers.to_vec(),
        miss_budget,
        cutoff,
        miss_bound: bound,
        max_linf: None,
        fixture: false,
    };
    let single = layers.len() == 1;
    Ok(BoxConfig::build(*geometry, raw, single, prov))
}

/// Open-edge graph on a box with adjacency in compressed form.
#[derive(Clone, Debug)]
pub struct BoxConfig {
    geometry: LatticeBox,
    edges: Vec<(u32, u32)>,
    uniforms: Option<Vec<f64>>,
    offsets: Vec<u32>,
    adjacency: Vec<u32>,
    provenance: Provenance,
}

impl PartialEq for BoxConfig {
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry && self.edges == other.edges && self.provenance == other.provenance
    }
}

impl BoxConfig {
    fn build(geometry: LatticeBox, mut raw: Vec<(u32, u32, f64)>, keep_u: bool, provenance: Provenance) -> BoxConfig {
        raw.sort_unstable_by_key(|a| (a.0, a.1));
        raw.dedup_by_key(|e| (e.0, e.1));
        let uniforms = keep_u.then(|| raw.iter().map(|e| e.2).collect());
        let edges: Vec<(u32, u32)> = raw.iter().map(|e| (e.0, e.1)).collect();
        let n = geometry.volume();
        let mut deg = vec![0u32; n + 1];
        for &(a, b) in &edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut fill = offsets.clone();
        let mut adjacency = vec![0u32; 2 * edges.len()];
        for &(a, b) in &edges {
            adjacency[fill[a as usize] as usize] = b;
            fill[a as usize] += 1;
            adjacency[fill[b as usize] as usize] = a;
            fill[b as usize] += 1;
        }
        for i in 0..n {
            adjacency[offsets[i] as usize..offsets[i + 1] as usize].sort_unstable();
        }
        BoxConfig { geometry, edges, uniforms, offsets, adjacency, provenance }
    }

    /// Configuration with exactly the given edges (endpoints as points).
    pub fn from_edges(geometry: LatticeBox, edges: &[(Point, Point)]) -> Result<BoxConfig> {
        let mut raw = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let ia = geometry.index_of(a).ok_or(Error::SourceOutsideSet)?;
            let ib = geometry.index_of(b).ok_or(Error::SourceOutsideSet)?;
            if ia == ib {
                return Err(Error::SelfLoop);
            }
            raw.push((ia.min(ib) as u32, ia.max(ib) as u32, 0.0));
        }
        Ok(BoxConfig::build(geometry, raw, false, Provenance::fixture()))
    }

    /// Every nearest-neighbour edge of the box open.
    pub fn all_nearest_neighbor(geometry: LatticeBox) -> BoxConfig {
        let mut raw = Vec::new();
        for (i, p) in geometry.points().enumerate() {
            for axis in 0..geometry.dim() {
                if let Some(j) = geometry.index_of(&(p + Point::unit(axis))) {
                    raw.push((i as u32, j as u32, 0.0));
                }
            }
        }
        BoxConfig::build(geometry, raw, false, Provenance::fixture())
    }

    /// No open edges.
    pub fn empty(geometry: LatticeBox) -> BoxConfig {
        BoxConfig::build(geometry, Vec::new(), false, Provenance::fixture())
    }

    pub fn geometry(&self) -> &LatticeBox {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn num_vertices(&self) -> usize {
        self.geometry.volume()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as vertex-index pairs `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn uniforms(&self) -> Option<&[f64]> {
        self.uniforms.as_deref()
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&(b as u32)).is_ok()
    }

    pub fn point(&self, v: usize) -> Point {
        self.geometry.point(v)
    }

    pub fn index(&self, p: &Point) -> Option<usize> {
        self.geometry.index_of(p)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Sup-norm length of edge `i`.
    pub fn edge_linf(&self, i: usize) -> i64 {
        let (a, b) = self.edges[i];
        (self.point(b as usize) - self.point(a as usize)).linf()
    }

    fn subset(&self, keep: impl Fn(usize) -> bool, provenance: Provenance) -> BoxConfig {
        let mut raw = Vec::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if keep(i) {
                raw.push((a, b, self.uniforms.as_ref().map_or(0.0, |u| u[i])));
            }
        }
        BoxConfig::build(self.geometry, raw, self.uniforms.is_some(), provenance)
    }

    /// `ω_{≤N}`: drops every edge of sup-norm length above `n`.
    pub fn filter_max_linf(&self, n: i64) -> BoxConfig {
        let mut prov = self.provenance.clone();
        prov.max_linf = Some(prov.max_linf.map_or(n, |m| m.min(n)));
        self.subset(|i| self.edge_linf(i) <= n, prov)
    }

    /// The configuration at a smaller `β'` under the same coupling.
    pub fn restrict_beta(&self, beta: f64) -> Result<BoxConfig> {
        check_beta(beta)?;
        let (kernel, old) = match self.provenance.layers.as_slice() {
            [Layer { model: EdgeModel::BetaJ { kernel, beta }, .. }] => (kernel.clone(), *beta),
            _ => return Err(Error::InvalidParameter("restrict_beta needs a single βJ layer".into())),
        };
        if beta > old {
            return Err(Error::InvalidParameter(format!("cannot raise β from {old} to {beta}")));
        }
        let u = self.uniforms.as_ref().expect("single-layer configurations keep uniforms");
        let mut prov = self.provenance.clone();
        prov.layers[0].model = EdgeModel::BetaJ { kernel: kernel.clone(), beta };
        if old > 0.0 {
            prov.miss_bound *= beta / old;
        }
        let d = self.dim();
        Ok(self.subset(
            |i| {
                let (a, b) = self.edges[i];
                let v = self.point(b as usize) - self.point(a as usize);
                u[i] <= open_prob_from_weight(beta, kernel.eval_class(&v.canonical_class(d)))
            },
            prov,
        ))
    }

    /// Induced configuration on a sub-box.
    pub fn subbox(&self, inner: &LatticeBox) -> Result<BoxConfig> {
        if !self.geometry.contains_box(inner) {
            return Err(Error::GeometryInfeasible("sub-box must lie inside the box".into()));
        }
        let mut raw = Vec::new();
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            let pa = self.point(a as usize);
            let pb = self.point(b as usize);
            if let (Some(x), Some(y)) = (inner.index_of(&pa), inner.index_of(&pb)) {
                raw.push((x as u32, y as u32, self.uniforms.as_ref().map_or(0.0, |u| u[i])));
            }
        }
        Ok(BoxConfig::build(*inner, raw, self.uniforms.is_some(), self.provenance.clone()))
    }

    /// Samples again from the recorded provenance.
    pub fn regenerate(&self) -> Result<BoxConfig> {
        if self.provenance.fixture {
            return Err(Error::InvalidParameter("fixtures have no random provenance".into()));
        }
        let cfg = sample_layers(&self.geometry, self.provenance.seed, &self.provenance.layers, self.provenance.miss_budget)?;
        Ok(match self.provenance.max_linf {
            Some(n) => cfg.filter_max_linf(n),
            None => cfg,
        })
    }

    /// Plain-text serialization; [`BoxConfig::from_text`] inverts it.
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let d = g.dim();
        let p = &self.provenance;
        let mut s = String::new();
        let _ = writeln!(s, "# lrperc box configuration v1");
        match g.as_ball() {
            Some((c, r)) => {
                let _ = writeln!(s, "dim={d} center={} radius={r}", c.fmt_dim(d));
            }
            None => {
                let _ = writeln!(s, "dim={d} lo={} hi={}", g.lo().fmt_dim(d), g.hi().fmt_dim(d));
            }
        }
        let _ = writeln!(
            s,
            "seed={} miss_budget={} cutoff={} miss_bound={} max_linf={} fixture={}",
            p.seed,
            p.miss_budget,
            p.cutoff,
            p.miss_bound,
            p.max_linf.map_or("none".to_string(), |n| n.to_string()),
            p.fixture
        );
        for l in &p.layers {
            let _ = writeln!(s, "layer stream={} {}", l.stream, l.model.spec());
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for &(a, b) in &self.edges {
            let _ = writeln!(s, "{} {}", self.point(a as usize).fmt_dim(d), self.point(b as usize).fmt_dim(d));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<BoxConfig> {
        let bad = |m: &str| Error::ConfigParse(format!("box configuration: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let kv = |line: &str| -> std::collections::BTreeMap<String, String> {
            line.split_whitespace()
                .filter_map(|t| t.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
                .collect()
        };
        let geo = kv(lines.next().ok_or_else(|| bad("missing geometry line"))?);
        let get = |m: &std::collections::BTreeMap<String, String>, k: &str| -> Result<String> {
            m.get(k).cloned().ok_or_else(|| bad(&format!("missing `{k}`")))
        };
        let d: usize = get(&geo, "dim")?.parse().map_err(|_| bad("dim"))?;
        let geometry = if geo.contains_key("center") {
            let c = Point::parse_dim(&get(&geo, "center")?, d)?;
            let r: i64 = get(&geo, "radius")?.parse().map_err(|_| bad("radius"))?;
            LatticeBox::ball(d, c, r)?
        } else {
            LatticeBox::new(d, Point::parse_dim(&get(&geo, "lo")?, d)?, Point::parse_dim(&get(&geo, "hi")?, d)?)?
        };
        let meta = kv(lines.next().ok_or_else(|| bad("missing provenance line"))?);
        let num = |k: &str| -> Result<f64> { get(&meta, k)?.parse::<f64>().map_err(|_| bad(k)) };
        let mut prov = Provenance {
            seed: get(&meta, "seed")?.parse().map_err(|_| bad("seed"))?,
            layers: Vec::new(),
            miss_budget: num("miss_budget")?,
            cutoff: get(&meta, "cutoff")?.parse().map_err(|_| bad("cutoff"))?,
            miss_bound: num("miss_bound")?,
            max_linf: match get(&meta, "max_linf")?.as_str() {
                "none" => None,
                v => Some(v.parse().map_err(|_| bad("max_linf"))?),
            },
            fixture: get(&meta, "fixture")?.parse().map_err(|_| bad("fixture"))?,
        };
        let mut edge_count = None;
        for line in lines.by_ref() {
            if let Some(n) = line.strip_prefix("edges ") {
                edge_count = Some(n.trim().parse::<usize>().map_err(|_| bad("edge count"))?);
                break;
            }
            let rest = line.strip_prefix("layer ").ok_or_else(|| bad("expected `layer` or `edges`"))?;
            let m = kv(rest);
            let stream: u8 = get(&m, "stream")?.parse().map_err(|_| bad("stream"))?;
            let model = match get(&m, "model")?.as_str() {
                "betaj" => EdgeModel::BetaJ {
                    kernel: Kernel::parse(&get(&m, "kernel")?, d)?,
                    beta: get(&m, "beta")?.parse().map_err(|_| bad("beta"))?,
                },
                "pf" => EdgeModel::ShortEdge(ShortEdgeFunction::parse(&get(&m, "spec")?, d)?),
                other => return Err(bad(&format!("unknown model `{other}`"))),
            };
            prov.layers.push(Layer { stream, model });
        }
        let count = edge_count.ok_or_else(|| bad("missing edge list"))?;
        let mut raw = Vec::with_capacity(count);
        for line in lines {
            let (a, b) = line.trim().split_once(' ').ok_or_else(|| bad("edge line"))?;
            let pa = Point::parse_dim(a, d)?;
            let pb = Point::parse_dim(b, d)?;
            let ia = geometry.index_of(&pa).ok_or_else(|| bad("edge endpoint outside box"))?;
            let ib = geometry.index_of(&pb).ok_or_else(|| bad("edge endpoint outside box"))?;
            raw.push((ia.min(ib) as u32, ia.max(ib) as u32, 0.0));
        }
        if raw.len() != count {
            return Err(bad("edge count mismatch"));
        }
        let single = prov.layers.len() == 1 && !prov.fixture;
        if single {
            let field = CouplingField::new(prov.seed, prov.layers[0].stream);
            for e in raw.iter_mut() {
                let pa = geometry.point(e.0 as usize);
                let pb = geometry.point(e.1 as usize);
                e.2 = field.edge_uniform(&pa, &pb, d)?;
            }
        }
        Ok(BoxConfig::build(geometry, raw, single, prov))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(d: usize, r: i64) -> LatticeBox {
        LatticeBox::centered(d, r).unwrap()
    }

    #[test]
    fn zero_beta_is_empty() {
        let k = Kernel::power_law(2, 1.0, 3.0).unwrap();
        let c = sample_box(&k, 0.0, &ball(2, 5), CouplingField::new(1, 0), 1e-3).unwrap();
        assert_eq!(c.num_edges(), 0);
    }

    #[test]
    fn truncation_to_one_keeps_unit_edges() {
        let k = Kernel::power_law(2, 1.0, 3.0).unwrap().truncate(1.0).unwrap();
        let c = sample_box(&k, 2.0, &ball(2, 6), CouplingField::new(3, 0), 1e-3).unwrap();
        assert!(c.num_edges() > 0);
        for i in 0..c.num_edges() {
            let (a, b) = c.edges()[i];
            assert_eq!((c.point(b as usize) - c.point(a as usize)).norm2_sq(), 1);
        }
        assert_eq!(c.provenance().miss_bound, 0.0);
    }

    #[test]
    fn matches_pointwise_edge_open() {
        let k = Kernel::power_law(2, 1.0, 3.0).unwrap();
        let g = ball(2, 4);
        let field = CouplingField::new(11, 0);
        let c = sample_box(&k, 0.8, &g, field, 1e-3).unwrap();
        assert_eq!(c.provenance().cutoff, 8);
        let pts: Vec<Point> = g.points().collect();
        let mut want = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if field.edge_open(&pts[i], &pts[j], 0.8, &k).unwrap() {
                    want.push((i as u32, j as u32));
                }
            }
        }
        assert_eq!(c.edges(), want.as_slice());
    }

    #[test]
    fn adjacency_is_symmetric() {
        let k = Kernel::power_law(3, 1.0, 4.5).unwrap();
        let c = sample_box(&k, 1.0, &ball(3, 3), CouplingField::new(2, 0), 1e-3).unwrap();
        for v in 0..c.num_vertices() {
            for &w in c.neighbors(v) {
                assert!(c.has_edge(w as usize, v));
            }
        }
        let total: usize = (0..c.num_vertices()).map(|v| c.degree(v)).sum();
        assert_eq!(total, 2 * c.num_edges());
    }

    #[test]
    fn cutoff_respects_budget() {
        let k = Kernel::power_law(2, 1.0, 8.0).unwrap();
        let g = ball(2, 60);
        let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), 1.0).unwrap(), g, 1e-3).unwrap();
        assert!(plan.cutoff() < 30);
        assert!(plan.miss_bound() < 1e-3);
        let tail = k.linf_tail(plan.cutoff()).unwrap();
        assert!((plan.miss_bound() - g.volume() as f64 * tail).abs() < 1e-12);
    }

    #[test]
    fn restrict_equals_direct_sampling() {
        let k = Kernel::power_law(2, 1.0, 3.5).unwrap();
        let g = ball(2, 5);
        let f = CouplingField::new(8, 0);
        let hi = sample_box(&k, 1.5, &g, f, 1e-3).unwrap();
        for beta in [0.2, 0.7, 1.5] {
            let direct = sample_box(&k, beta, &g, f, 1e-3).unwrap();
            let restricted = hi.restrict_beta(beta).unwrap();
            assert_eq!(direct.edges(), restricted.edges());
        }
    }

    #[test]
    fn linf_filter() {
        let k = Kernel::power_law(2, 1.0, 3.0).unwrap();
        let c = sample_box(&k, 2.0, &ball(2, 6), CouplingField::new(4, 0), 1e-3).unwrap();
        let f = c.filter_max_linf(2);
        let want: Vec<(u32, u32)> =
            (0..c.num_edges()).filter(|&i| c.edge_linf(i) <= 2).map(|i| c.edges()[i]).collect();
        assert_eq!(f.edges(), want.as_slice());
    }

    #[test]
    fn text_round_trip_and_regeneration() {
        let k = Kernel::perturbed_nn(Kernel::power_law(2, 0.5, 4.0).unwrap(), 1.0).unwrap();
        let c = sample_box(&k, 0.9, &ball(2, 6), CouplingField::new(77, 1), 1e-3).unwrap();
        let text = c.to_text();
        let back = BoxConfig::from_text(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.uniforms(), c.uniforms());
        assert_eq!(back.to_text(), text);
        assert_eq!(c.regenerate().unwrap(), c);
        let sf = ShortEdgeFunction::new(2, 0.4, ShortRule::PowerLaw { gamma: 0.3, exponent: 3.5 }).unwrap();
        let g = LatticeBox::new(2, Point::new(&[0, -3]), Point::new(&[7, 2])).unwrap();
        let c2 = sample_box_pf(&sf, &g, CouplingField::new(5, 0), 1e-3).unwrap();
        assert_eq!(BoxConfig::from_text(&c2.to_text()).unwrap(), c2);
    }

    #[test]
    fn pf_extremes() {
        let g = ball(2, 5);
        let none = ShortEdgeFunction::new(2, 0.0, ShortRule::Zero).unwrap();
        assert_eq!(sample_box_pf(&none, &g, CouplingField::new(1, 0), 1e-3).unwrap().num_edges(), 0);
        let all = ShortEdgeFunction::new(2, 1.0, ShortRule::Zero).unwrap();
        let c = sample_box_pf(&all, &g, CouplingField::new(1, 0), 1e-3).unwrap();
        assert_eq!(c.edges(), BoxConfig::all_nearest_neighbor(g).edges());
    }

    #[test]
    fn layers_need_distinct_streams() {
        let k = Kernel::nearest_neighbor(2, 1.0).unwrap();
        let m = EdgeModel::beta_j(k, 1.0).unwrap();
        let layers = vec![Layer { stream: 0, model: m.clone() }, Layer { stream: 0, model: m }];
        assert_eq!(sample_layers(&ball(2, 2), 1, &layers, 1e-3), Err(Error::SameStream));
    }
}
