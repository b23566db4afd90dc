//! Lattice points and axis-aligned boxes of Z^d.
//!
//! Points carry up to [`MAX_DIM`] coordinates; unused trailing coordinates are
//! zero, so norms and the derived lexicographic order are dimension agnostic.
//! Vertices of a [`LatticeBox`] are indexed so that index order coincides with
//! lexicographic order of the points.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

pub const MAX_DIM: usize = 4;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Point(pub [i64; MAX_DIM]);

impl Point {
    pub const ORIGIN: Point = Point([0; MAX_DIM]);

    /// Builds a point from up to four coordinates.
    pub fn new(coords: &[i64]) -> Point {
        assert!(coords.len() <= MAX_DIM, "at most {MAX_DIM} coordinates");
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point(c)
    }

    /// Unit vector along `axis`.
    pub fn unit(axis: usize) -> Point {
        let mut c = [0; MAX_DIM];
        c[axis] = 1;
        Point(c)
    }

    pub fn coords(&self, dim: usize) -> &[i64] {
        &self.0[..dim]
    }

    pub fn is_origin(&self) -> bool {
        self.0 == [0; MAX_DIM]
    }

    pub fn linf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn norm2_sq(&self) -> i64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn norm2(&self) -> f64 {
        (self.norm2_sq() as f64).sqrt()
    }

    /// Sorted absolute values of the first `dim` coordinates. Kernels that are
    /// invariant under the lattice symmetry group depend only on this class.
    pub fn canonical_class(&self, dim: usize) -> Point {
        let mut c = [0; MAX_DIM];
        for (i, v) in self.0[..dim].iter().enumerate() {
            c[i] = v.abs();
        }
        c[..dim].sort_unstable();
        Point(c)
    }

    /// True when the first non-zero coordinate is positive.
    pub fn is_lex_positive(&self) -> bool {
        self.0.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
    }

    /// Checks that coordinates beyond `dim` vanish.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.0[dim.min(MAX_DIM)..].iter().any(|&c| c != 0) {
            let got = self.0.iter().rposition(|&c| c != 0).map_or(0, |p| p + 1);
            return Err(Error::DimensionMismatch { expected: dim, got });
        }
        Ok(())
    }

    pub fn as_f64(&self, dim: usize) -> Vec<f64> {
        self.0[..dim].iter().map(|&c| c as f64).collect()
    }

    pub fn fmt_dim(&self, dim: usize) -> String {
        self.0[..dim.max(1)]
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_dim(s: &str, dim: usize) -> Result<Point> {
        let coords: std::result::Result<Vec<i64>, _> =
            s.split(',').map(|t| t.trim().parse::<i64>()).collect();
        let coords = coords.map_err(|e| Error::ConfigParse(format!("bad point `{s}`: {e}")))?;
        if coords.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: coords.len() });
        }
        Ok(Point::new(&coords))
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let used = self.0.iter().rposition(|&c| c != 0).map_or(1, |p| p + 1);
        write!(f, "({})", self.fmt_dim(used))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a += b;
        }
        Point(c)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a -= b;
        }
        Point(c)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point(self.0.map(|c| -c))
    }
}

impl Mul<i64> for Point {
    type Output = Point;
    fn mul(self, k: i64) -> Point {
        Point(self.0.map(|c| c * k))
    }
}

/// An axis-aligned box `lo..=hi` in Z^d.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct LatticeBox {
    dim: usize,
    lo: Point,
    hi: Point,
}

impl LatticeBox {
    pub fn new(dim: usize, lo: Point, hi: Point) -> Result<LatticeBox> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        lo.check_dim(dim)?;
        hi.check_dim(dim)?;
        if (0..dim).any(|i| lo.0[i] > hi.0[i]) {
            return Err(Error::EmptySet);
        }
        let b = LatticeBox { dim, lo, hi };
        if b.volume_u128() > u32::MAX as u128 / 2 {
            return Err(Error::TooLarge(format!("box with {} vertices", b.volume_u128())));
        }
        Ok(b)
    }

    /// The ball `B_m(center) = center + {-m..m}^d` of the sup-norm.
    pub fn ball(dim: usize, center: Point, radius: i64) -> Result<LatticeBox> {
        if radius < 0 {
            return Err(Error::InvalidParameter(format!("negative radius {radius}")));
        }
        let mut lo = center;
        let mut hi = center;
        for i in 0..dim.min(MAX_DIM) {
            lo.0[i] -= radius;
            hi.0[i] += radius;
        }
        LatticeBox::new(dim, lo, hi)
    }

    /// `B_m` centred at the origin.
    pub fn centered(dim: usize, radius: i64) -> Result<LatticeBox> {
        LatticeBox::ball(dim, Point::ORIGIN, radius)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> Point {
        self.lo
    }

    pub fn hi(&self) -> Point {
        self.hi
    }

    pub fn side(&self, axis: usize) -> i64 {
        self.hi.0[axis] - self.lo.0[axis] + 1
    }

    fn volume_u128(&self) -> u128 {
        (0..self.dim).map(|i| self.side(i) as u128).product()
    }

    pub fn volume(&self) -> usize {
        self.volume_u128() as usize
    }

    /// `Some((center, radius))` when the box is a sup-norm ball.
    pub fn as_ball(&self) -> Option<(Point, i64)> {
        let s = self.side(0);
        if s % 2 == 0 || (1..self.dim).any(|i| self.side(i) != s) {
            return None;
        }
        let r = (s - 1) / 2;
        let mut c = self.lo;
        for i in 0..self.dim {
            c.0[i] += r;
        }
        Some((c, r))
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|i| p.0[i] >= self.lo.0[i] && p.0[i] <= self.hi.0[i])
            && p.0[self.dim..].iter().all(|&c| c == 0)
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        other.dim == self.dim && self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn intersect(&self, other: &LatticeBox) -> Option<LatticeBox> {
        if other.dim != self.dim {
            return None;
        }
        let mut lo = self.lo;
        let mut hi = self.hi;
        for i in 0..self.dim {
            lo.0[i] = lo.0[i].max(other.lo.0[i]);
            hi.0[i] = hi.0[i].min(other.hi.0[i]);
            if lo.0[i] > hi.0[i] {
                return None;
            }
        }
        Some(LatticeBox { dim: self.dim, lo, hi })
    }

    /// Linear index; increasing index means lexicographically larger point.
    #[inline]
    pub fn index_of(&self, p: &Point) -> Option<usize> {
        let mut idx: usize = 0;
        for i in 0..self.dim {
            let c = p.0[i];
            if c < self.lo.0[i] || c > self.hi.0[i] {
                return None;
            }
            idx = idx * self.side(i) as usize + (c - self.lo.0[i]) as usize;
        }
        Some(idx)
    }

    #[inline]
    pub fn point(&self, mut idx: usize) -> Point {
        let mut c = [0; MAX_DIM];
        for i in (0..self.dim).rev() {
            let s = self.side(i) as usize;
            c[i] = self.lo.0[i] + (idx % s) as i64;
            idx /= s;
        }
        Point(c)
    }

    /// Points in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.volume()).map(move |i| self.point(i))
    }

    /// True when `p` lies on the inner boundary (some coordinate at an extreme).
    pub fn on_boundary(&self, p: &Point) -> bool {
        (0..self.dim).any(|i| p.0[i] == self.lo.0[i] || p.0[i] == self.hi.0[i])
    }

    /// Sup-norm distance from the box centre for sup-norm balls.
    pub fn radius(&self) -> Option<i64> {
        self.as_ball().map(|(_, r)| r)
    }
}

/// A subset of the vertices of a box, stored both as a membership mask and a
/// sorted index list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet {
    mask: Vec<bool>,
    members: Vec<u32>,
}

impl VertexSet {
    pub fn empty(n: usize) -> VertexSet {
        VertexSet { mask: vec![false; n], members: Vec::new() }
    }

    pub fn full(n: usize) -> VertexSet {
        VertexSet { mask: vec![true; n], members: (0..n as u32).collect() }
    }

    pub fn from_indices(n: usize, idx: impl IntoIterator<Item = usize>) -> VertexSet {
        let mut mask = vec![false; n];
        for i in idx {
            mask[i] = true;
        }
        VertexSet::from_mask(mask)
    }

    pub fn from_mask(mask: Vec<bool>) -> VertexSet {
        let members = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i as u32).collect();
        VertexSet { mask, members }
    }

    /// All vertices of `outer` that lie in `inner`.
    pub fn from_subbox(outer: &LatticeBox, inner: &LatticeBox) -> VertexSet {
        let mut set = VertexSet::empty(outer.volume());
        if let Some(b) = outer.intersect(inner) {
            for p in b.points() {
                let i = outer.index_of(&p).expect("inside");
                set.mask[i] = true;
            }
            set.members = set.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i as u32).collect();
        }
        set
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        VertexSet::from_mask(mask)
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && !*b).collect();
        VertexSet::from_mask(mask)
    }
}
