//! Deterministic per-edge uniforms.
//!
//! Every edge `{a, b}` is keyed by its lexicographically positive displacement
//! `v = max(a,b) − min(a,b)` and its base point `min(a,b)`. For a fixed `v`,
//! base points are grouped into aligned tiles of `2^H` points per axis, and each
//! tile carries a binary-per-axis tree. A node's value is the minimum of the
//! uniforms below it; the root minimum is drawn first, the child holding it is
//! chosen by a keyed hash, and the remaining children draw their own minima
//! conditioned to exceed it. A leaf value is the edge uniform. The construction
//! yields i.i.d. uniforms that are a pure function of `(seed, stream, edge)`,
//! and it lets the sampler discard whole subtrees whose minimum exceeds the
//! opening probability.

use crate::error::{Error, Result};
use crate::kernel::{open_prob_from_weight, Kernel};
use crate::lattice::{Point, MAX_DIM};
use serde::{Deserialize, Serialize};

pub const STREAM_BASE: u8 = 0;
pub const STREAM_SPRINKLE_1: u8 = 1;
pub const STREAM_SPRINKLE_2: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CouplingField {
    pub seed: u64,
    pub stream: u8,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const TAG_MIN: u64 = 0x6d69_6e00;
const TAG_ARG: u64 = 0x6172_6700;

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn absorb(h: u64, w: u64) -> u64 {
    mix64(h ^ mix64(w.wrapping_add(GOLDEN)))
}

/// Seed for replicate `index` derived from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    absorb(absorb(0x7265_706c_6963_6174, base), index)
}

#[inline]
pub(crate) fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Tile height `H` (tiles have `2^H` base points per axis).
pub(crate) fn tile_levels(dim: usize) -> u32 {
    match dim {
        1 => 12,
        2 => 7,
        3 => 5,
        _ => 4,
    }
}

/// Minimum of `2^{level·d}` uniforms conditioned to exceed `bound`.
#[inline]
fn conditioned_min(bound: f64, u: f64, level: u32, dim: usize) -> f64 {
    let n = (2f64).powi((level as usize * dim) as i32);
    let q = -((-u).ln_1p() / n).exp_m1();
    bound + (1.0 - bound) * q
}

/// Tree for one displacement of one field.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DisplacementTree {
    prefix: u64,
    dim: usize,
    levels: u32,
}

impl DisplacementTree {
    pub fn new(field: CouplingField, v: &Point, dim: usize) -> DisplacementTree {
        let mut h = absorb(0x6c72_7065_7263, field.seed);
        h = absorb(h, field.stream as u64);
        for &c in v.coords(dim) {
            h = absorb(h, c as u64);
        }
        DisplacementTree { prefix: h, dim, levels: tile_levels(dim) }
    }

    #[inline]
    fn node_hash(&self, level: u32, idx: &[i64; MAX_DIM], tag: u64) -> u64 {
        let mut h = absorb(self.prefix, (level as u64) ^ tag);
        for &c in &idx[..self.dim] {
            h = absorb(h, c as u64);
        }
        h
    }

    #[inline]
    fn draw_min(&self, bound: f64, level: u32, idx: &[i64; MAX_DIM]) -> f64 {
        conditioned_min(bound, to_unit(self.node_hash(level, idx, TAG_MIN)), level, self.dim)
    }

    #[inline]
    fn argmin_child(&self, level: u32, idx: &[i64; MAX_DIM]) -> usize {
        (self.node_hash(level, idx, TAG_ARG) >> 40) as usize & ((1 << self.dim) - 1)
    }

    /// Uniform attached to the edge with this displacement and base point.
    pub fn uniform_at(&self, base: &Point) -> f64 {
        let d = self.dim;
        let h = self.levels;
        let mut idx = [0i64; MAX_DIM];
        for i in 0..d {
            idx[i] = base.0[i] >> h;
        }
        let mut m = self.draw_min(0.0, h, &idx);
        for level in (1..=h).rev() {
            let arg = self.argmin_child(level, &idx);
            let mut bits = 0usize;
            for i in 0..d {
                let b = ((base.0[i] >> (level - 1)) & 1) as usize;
                bits |= b << i;
                idx[i] = idx[i] * 2 + b as i64;
            }
            if bits != arg {
                m = self.draw_min(m, level - 1, &idx);
            }
        }
        m
    }

    /// Calls `emit(base, u)` for every base point in `lo..=hi` whose uniform
    /// satisfies `u ≤ p`.
    pub fn enumerate(&self, lo: &Point, hi: &Point, p: f64, emit: &mut impl FnMut(Point, f64)) {
        if p <= 0.0 {
            return;
        }
        let d = self.dim;
        let h = self.levels;
        let n_top = (2f64).powi((h as usize * d) as i32);
        let top_accept = -(n_top * (-p).ln_1p()).exp_m1();
        let guard = top_accept * (1.0 + 1e-9) + 1e-300;
        let mut tlo = [0i64; MAX_DIM];
        let mut thi = [0i64; MAX_DIM];
        for i in 0..d {
            tlo[i] = lo.0[i] >> h;
            thi[i] = hi.0[i] >> h;
        }
        let mut idx = tlo;
        loop {
            let u = to_unit(self.node_hash(h, &idx, TAG_MIN));
            if u <= guard {
                let m = conditioned_min(0.0, u, h, d);
                if m <= p {
                    self.descend(h, idx, m, lo, hi, p, emit);
                }
            }
            // odometer over tiles
            let mut i = d;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if idx[i] < thi[i] {
                    idx[i] += 1;
                    break;
                }
                idx[i] = tlo[i];
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        level: u32,
        idx: [i64; MAX_DIM],
        m: f64,
        lo: &Point,
        hi: &Point,
        p: f64,
        emit: &mut impl FnMut(Point, f64),
    ) {
        let d = self.dim;
        if level == 0 {
            let mut c = [0i64; MAX_DIM];
            c[..d].copy_from_slice(&idx[..d]);
            emit(Point(c), m);
            return;
        }
        let arg = self.argmin_child(level, &idx);
        let cl = level - 1;
        'child: for bits in 0..(1usize << d) {
            let mut child = [0i64; MAX_DIM];
            for i in 0..d {
                child[i] = idx[i] * 2 + ((bits >> i) & 1) as i64;
                let start = child[i] << cl;
                let end = start + (1i64 << cl) - 1;
                if end < lo.0[i] || start > hi.0[i] {
                    continue 'child;
                }
            }
            if bits == arg {
                self.descend(cl, child, m, lo, hi, p, emit);
            } else {
                let mc = self.draw_min(m, cl, &child);
                if mc <= p {
                    self.descend(cl, child, mc, lo, hi, p, emit);
                }
            }
        }
    }
}

/// Canonical form of an edge: `(base, displacement)` with a lexicographically
/// positive displacement.
pub fn canonical_edge(a: &Point, b: &Point) -> Result<(Point, Point)> {
    if a == b {
        return Err(Error::SelfLoop);
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    Ok((*lo, *hi - *lo))
}

impl CouplingField {
    pub fn new(seed: u64, stream: u8) -> CouplingField {
        CouplingField { seed, stream }
    }

    /// `U_e` for an edge of Z^dim, invariant under swapping the endpoints.
    pub fn edge_uniform(&self, a: &Point, b: &Point, dim: usize) -> Result<f64> {
        a.check_dim(dim)?;
        b.check_dim(dim)?;
        let (base, v) = canonical_edge(a, b)?;
        Ok(DisplacementTree::new(*self, &v, dim).uniform_at(&base))
    }

    /// `U_e ≤ 1 − e^{−βJ(e)}`.
    pub fn edge_open(&self, a: &Point, b: &Point, beta: f64, k: &Kernel) -> Result<bool> {
        let u = self.edge_uniform(a, b, k.dim())?;
        let p = k.open_probability(beta, &(*b - *a))?;
        Ok(p > 0.0 && u <= p)
    }
}

/// `ω_β ∨ ω'_α` evaluated at one edge.
pub fn union_field(
    a: &Point,
    b: &Point,
    k: &Kernel,
    f1: CouplingField,
    beta: f64,
    f2: CouplingField,
    alpha: f64,
) -> Result<bool> {
    if f1.stream == f2.stream {
        return Err(Error::SameStream);
    }
    Ok(f1.edge_open(a, b, beta, k)? || f2.edge_open(a, b, alpha, k)?)
}

/// Probability that an edge is open at `β` given its weight.
pub fn edge_probability(beta: f64, j: f64) -> f64 {
    open_prob_from_weight(beta, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2(x: i64, y: i64) -> Point {
        Point::new(&[x, y])
    }

    #[test]
    fn symmetric_and_deterministic() {
        let f = CouplingField::new(7, 0);
        let a = p2(3, -4);
        let b = p2(-1, 9);
        let u1 = f.edge_uniform(&a, &b, 2).unwrap();
        assert_eq!(u1, f.edge_uniform(&b, &a, 2).unwrap());
        assert_eq!(u1, f.edge_uniform(&a, &b, 2).unwrap());
        assert!((0.0..1.0).contains(&u1));
        assert_eq!(f.edge_uniform(&a, &a, 2), Err(Error::SelfLoop));
        assert_ne!(u1, CouplingField::new(7, 1).edge_uniform(&a, &b, 2).unwrap());
    }

    #[test]
    fn uniform_mean_within_four_sigma() {
        let f = CouplingField::new(12345, 0);
        let n = 100_000;
        let mut s = 0.0;
        for i in 0..n {
            let a = p2(i % 317, i / 317);
            let b = a + p2(1 + (i % 3), -(i % 5));
            s += f.edge_uniform(&a, &b, 2).unwrap();
        }
        let mean = s / n as f64;
        let sigma = (12.0 * n as f64).powf(-0.5);
        assert!((mean - 0.5).abs() < 4.0 * sigma, "mean {mean}");
    }

    #[test]
    fn uniform_histogram_is_flat() {
        // chi-square over 20 bins for edges within a single tile and across tiles
        let f = CouplingField::new(99, 2);
        let mut bins = [0u32; 20];
        let n = 200_000;
        for i in 0..n {
            let a = p2(i % 500 - 250, i / 500 - 200);
            let u = f.edge_uniform(&a, &(a + p2(0, 1)), 2).unwrap();
            bins[(u * 20.0) as usize] += 1;
        }
        let e = n as f64 / 20.0;
        let chi: f64 = bins.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        assert!(chi < 45.0, "chi2 {chi}");
    }

    #[test]
    fn enumeration_matches_pointwise() {
        for dim in 1..=3 {
            let v = Point::new(&[1, -2, 1][..dim]);
            let f = CouplingField::new(5, 1);
            let tree = DisplacementTree::new(f, &v, dim);
            let span = match dim {
                1 => 5000,
                2 => 150,
                _ => 40,
            };
            let lo = Point::new(&vec![-span / 2 - 3; dim]);
            let hi = Point::new(&vec![span / 2; dim]);
            for &p in &[0.0, 0.001, 0.05, 0.5] {
                let mut got = Vec::new();
                tree.enumerate(&lo, &hi, p, &mut |b, u| got.push((b, u)));
                let bx = crate::lattice::LatticeBox::new(dim, lo, hi).unwrap();
                let want: Vec<(Point, f64)> = bx
                    .points()
                    .map(|b| (b, tree.uniform_at(&b)))
                    .filter(|(_, u)| *u <= p)
                    .collect();
                got.sort_by_key(|e| e.0);
                assert_eq!(got, want, "dim {dim} p {p}");
            }
        }
    }

    #[test]
    fn open_monotone_in_beta() {
        let k = Kernel::power_law(2, 1.0, 3.0).unwrap();
        let f = CouplingField::new(1, 0);
        for i in 0..500 {
            let a = p2(i, 2 * i);
            let b = a + p2(1 + i % 4, i % 3);
            let mut prev = false;
            for beta in [0.0, 0.1, 0.3, 0.7, 2.0, 10.0] {
                let o = f.edge_open(&a, &b, beta, &k).unwrap();
                assert!(!prev || o);
                if beta == 0.0 {
                    assert!(!o);
                }
                prev = o;
            }
        }
        let z = Kernel::nearest_neighbor(2, 0.0).unwrap();
        assert!(!f.edge_open(&p2(0, 0), &p2(1, 0), 100.0, &z).unwrap());
    }

    #[test]
    fn union_requires_distinct_streams() {
        let k = Kernel::nearest_neighbor(2, 1.0).unwrap();
        let f = CouplingField::new(1, 0);
        let e = (p2(0, 0), p2(1, 0));
        assert_eq!(union_field(&e.0, &e.1, &k, f, 1.0, f, 1.0), Err(Error::SameStream));
        let g = CouplingField::new(1, 1);
        assert_eq!(
            union_field(&e.0, &e.1, &k, f, 0.7, g, 0.0).unwrap(),
            f.edge_open(&e.0, &e.1, 0.7, &k).unwrap()
        );
        assert!(!union_field(&e.0, &e.1, &k, f, 0.0, g, 0.0).unwrap());
    }

    #[test]
    fn union_law_three_quarters() {
        let k = Kernel::nearest_neighbor(1, 1.0).unwrap();
        let ln2 = 2f64.ln();
        let n = 100_000u64;
        let e = (Point::new(&[0]), Point::new(&[1]));
        let mut hits = 0;
        for s in 0..n {
            let f1 = CouplingField::new(s, 0);
            let f2 = CouplingField::new(s, 1);
            if union_field(&e.0, &e.1, &k, f1, ln2, f2, ln2).unwrap() {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        let sigma = (0.75 * 0.25 / n as f64).sqrt();
        assert!((freq - 0.75).abs() < 4.0 * sigma, "{freq}");
    }
}
