//! Simple random walks and effective resistances on sampled configurations.
//! Every open edge has unit conductance, whatever its length.

use crate::cluster::components;
use crate::coupling::{derive_seed, CouplingField};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lattice::{LatticeBox, Point, VertexSet};
use crate::sampler::{BoxConfig, EdgeModel, SamplePlan};
use crate::stats::Estimate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, VecDeque};

/// One walk: how often it came back to the start and where it went.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WalkStats {
    pub steps: u64,
    pub returns: u64,
    pub visits: BTreeMap<usize, u64>,
    pub seed: u64,
}

fn check_start(cfg: &BoxConfig, start: usize) -> Result<()> {
    if start >= cfg.num_vertices() {
        return Err(Error::SourceOutsideSet);
    }
    if cfg.degree(start) == 0 {
        return Err(Error::IsolatedStart);
    }
    Ok(())
}

/// Runs a single walk of `steps` steps and records every visit.
pub fn walk(cfg: &BoxConfig, start: usize, steps: u64, seed: u64) -> Result<WalkStats> {
    check_start(cfg, start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visits = BTreeMap::new();
    let mut at = start;
    let mut returns = 0;
    for _ in 0..steps {
        let nb = cfg.neighbors(at);
        at = nb[rng.gen_range(0..nb.len())] as usize;
        *visits.entry(at).or_insert(0) += 1;
        if at == start {
            returns += 1;
        }
    }
    Ok(WalkStats { steps, returns, visits, seed })
}

fn returns_within(cfg: &BoxConfig, start: usize, steps: u64, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at = start;
    for _ in 0..steps {
        let nb = cfg.neighbors(at);
        at = nb[rng.gen_range(0..nb.len())] as usize;
        if at == start {
            return true;
        }
    }
    false
}

/// Fraction of independent walks from `start` that revisit it within `steps` steps.
pub fn return_frequency(cfg: &BoxConfig, start: usize, steps: u64, replicates: usize, seed: u64) -> Result<Estimate> {
    check_start(cfg, start)?;
    let hits: Vec<bool> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| returns_within(cfg, start, steps, derive_seed(seed, r)))
        .collect();
    Ok(Estimate::from_indicators(&hits, seed, "return_frequency"))
}

/// Effective resistance between `center` and `boundary`.
///
/// Solves the Dirichlet problem with potential 1 at `center` and 0 on
/// `boundary` by Jacobi-preconditioned conjugate gradients, stopping at
/// relative residual `1e-8`.
pub fn effective_resistance(cfg: &BoxConfig, center: usize, boundary: &VertexSet) -> Result<f64> {
    let n = cfg.num_vertices();
    if center >= n || boundary.universe() != n {
        return Err(Error::SourceOutsideSet);
    }
    if boundary.contains(center) {
        return Err(Error::OverlappingSets);
    }
    // component of the center, stopping at the boundary
    let mut slot = vec![usize::MAX; n];
    let mut interior = Vec::new();
    let mut queue = VecDeque::from([center]);
    let mut seen = vec![false; n];
    seen[center] = true;
    let mut reaches = false;
    while let Some(v) = queue.pop_front() {
        for &w in cfg.neighbors(v) {
            let w = w as usize;
            if boundary.contains(w) {
                reaches = true;
            } else if !seen[w] {
                seen[w] = true;
                slot[w] = interior.len();
                interior.push(w);
                queue.push_back(w);
            }
        }
    }
    if !reaches {
        return Err(Error::Disconnected);
    }
    let m = interior.len();
    let diag: Vec<f64> = interior.iter().map(|&v| cfg.degree(v) as f64).collect();
    let rhs: Vec<f64> = interior
        .iter()
        .map(|&v| cfg.neighbors(v).iter().filter(|&&w| w as usize == center).count() as f64)
        .collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        for (i, &v) in interior.iter().enumerate() {
            let mut s = diag[i] * x[i];
            for &w in cfg.neighbors(v) {
                let j = slot[w as usize];
                if j != usize::MAX {
                    s -= x[j];
                }
            }
            out[i] = s;
        }
    };
    let mut x = vec![0.0; m];
    if m > 0 {
        let bnorm = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        let mut r = rhs.clone();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; m];
        let cap = 10 * m + 100;
        let mut converged = bnorm == 0.0;
        for _ in 0..cap {
            if converged {
                break;
            }
            apply(&p, &mut ap);
            let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..m {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-8 * bnorm {
                converged = true;
                break;
            }
            for i in 0..m {
                z[i] = r[i] / diag[i];
            }
            let next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let ratio = next / rz;
            rz = next;
            for i in 0..m {
                p[i] = z[i] + ratio * p[i];
            }
        }
        if !converged {
            return Err(Error::NotConverged(format!("conjugate gradients did not reach 1e-8 in {cap} iterations")));
        }
    }
    let current: f64 = cfg
        .neighbors(center)
        .iter()
        .map(|&w| {
            let j = slot[w as usize];
            if j == usize::MAX { 1.0 } else { 1.0 - x[j] }
        })
        .sum();
    Ok(1.0 / current)
}

/// Resistance from `center` to every vertex at sup-distance `≥ n` from it.
pub fn resistance_to_exterior(cfg: &BoxConfig, center: usize, n: i64) -> Result<f64> {
    let g = cfg.geometry();
    let c = g.point(center);
    let outside: Vec<usize> = (0..cfg.num_vertices()).filter(|&v| (g.point(v) - c).linf() >= n).collect();
    if outside.is_empty() {
        return Err(Error::GeometryInfeasible(format!("no vertex at sup-distance {n} from the center")));
    }
    effective_resistance(cfg, center, &VertexSet::from_indices(cfg.num_vertices(), outside))
}

/// Vertex of `cluster` closest to `target` in sup norm, lexicographic ties.
pub fn nearest_member(cfg: &BoxConfig, cluster: &[usize], target: &Point) -> Option<usize> {
    cluster.iter().copied().min_by_key(|&v| {
        let p = cfg.point(v);
        ((p - *target).linf(), p)
    })
}

/// Resistances to the exterior of growing boxes and walk return
/// frequencies, both measured from the largest-cluster vertex nearest the
/// origin of independent configurations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransienceProbe {
    pub dim: usize,
    pub beta: f64,
    pub radii: Vec<i64>,
    pub resistance: Vec<Estimate>,
    pub returns: Estimate,
    pub horizon: u64,
    pub configs_used: usize,
}

impl TransienceProbe {
    /// `mean R(radii[j]) / mean R(radii[i])`.
    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        self.resistance[j].value / self.resistance[i].value
    }
}

#[allow(clippy::too_many_arguments)]
pub fn transience_probe(
    k: &Kernel,
    beta: f64,
    radii: &[i64],
    horizon: u64,
    walks: usize,
    configs: usize,
    seed: u64,
    miss_budget: f64,
) -> Result<TransienceProbe> {
    let rmax = *radii.iter().max().ok_or(Error::EmptySet)?;
    if radii.iter().any(|&r| r < 1) {
        return Err(Error::InvalidParameter("radii must be positive".into()));
    }
    let d = k.dim();
    let g = LatticeBox::centered(d, rmax + rmax / 4 + 1)?;
    let plan = SamplePlan::new(EdgeModel::beta_j(k.clone(), beta)?, g, miss_budget)?;
    let runs: Vec<Option<(Vec<f64>, f64)>> = (0..configs as u64)
        .into_par_iter()
        .map(|c| -> Result<Option<(Vec<f64>, f64)>> {
            let cs = derive_seed(seed, c);
            let cfg = plan.sample(CouplingField::new(cs, 0));
            let forest = components(&cfg);
            let (size, root_vertex) = forest.largest();
            if size < 2 {
                return Ok(None);
            }
            let cluster = forest.members(root_vertex);
            let center = nearest_member(&cfg, &cluster, &Point::ORIGIN).expect("nonempty cluster");
            let mut res = Vec::with_capacity(radii.len());
            for &r in radii {
                match resistance_to_exterior(&cfg, center, r) {
                    Ok(v) => res.push(v),
                    Err(Error::Disconnected) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            let ret = return_frequency(&cfg, center, horizon, walks, derive_seed(cs, 1))?;
            Ok(Some((res, ret.value)))
        })
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<&(Vec<f64>, f64)> = runs.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::SubcriticalRegime("no configuration connects its centre to the exterior".into()));
    }
    let resistance = (0..radii.len())
        .map(|i| {
            let xs: Vec<f64> = used.iter().map(|(r, _)| r[i]).collect();
            Estimate::from_samples(&xs, seed, "effective_resistance")
        })
        .collect();
    let rets: Vec<f64> = used.iter().map(|(_, f)| *f).collect();
    Ok(TransienceProbe {
        dim: d,
        beta,
        radii: radii.to_vec(),
        resistance,
        returns: Estimate::from_samples(&rets, seed, "return_frequency"),
        horizon,
        configs_used: used.len(),
    })
}
