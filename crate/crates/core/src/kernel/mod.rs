//! Edge kernels `J` and short-edge functions `f`.
//!
//! A [`Kernel`] is symmetric under the full hyperoctahedral group: every
//! evaluation first canonicalizes the displacement to its sorted absolute
//! coordinates. Truncation radii use the Euclidean norm; anything expressed in
//! sup-norm (box radii, shell sums used by the sampler) says so in its name.

mod spec;
pub(crate) mod sums;

use crate::error::{Error, Result};
use crate::lattice::{Point, MAX_DIM};
use std::collections::BTreeMap;
use sums::{for_each_class, for_each_shell_class, lattice_tail, lattice_zeta, Accumulator};

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    PowerLaw { prefactor: f64, exponent: f64 },
    Truncated { base: Box<Kernel>, radius: f64 },
    NearestNeighbor { weight: f64 },
    Tabulated(BTreeMap<Point, f64>),
    PerturbedNn { base: Box<Kernel>, nn_bonus: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    dim: usize,
    family: Family,
}

/// Behaviour of a kernel outside a finite sup-norm radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum FarField {
    Zero,
    Power { prefactor: f64, exponent: f64 },
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::InvalidParameter(format!("dimension {dim} outside 1..={MAX_DIM}")));
    }
    Ok(())
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

impl Kernel {
    /// `J(x) = C ‖x‖^{-s}` with `C > 0` and `s > d`.
    pub fn power_law(dim: usize, prefactor: f64, exponent: f64) -> Result<Kernel> {
        check_dim(dim)?;
        check_finite("prefactor", prefactor)?;
        check_finite("exponent", exponent)?;
        if prefactor <= 0.0 {
            return Err(Error::InvalidParameter(format!("prefactor must be positive, got {prefactor}")));
        }
        if exponent <= dim as f64 {
            return Err(Error::DivergentTail { exponent, dim });
        }
        Ok(Kernel { dim, family: Family::PowerLaw { prefactor, exponent } })
    }

    /// `J(x) = w` on the `2d` unit displacements, zero elsewhere.
    pub fn nearest_neighbor(dim: usize, weight: f64) -> Result<Kernel> {
        check_dim(dim)?;
        check_finite("weight", weight)?;
        if weight < 0.0 {
            return Err(Error::InvalidParameter(format!("weight must be nonnegative, got {weight}")));
        }
        Ok(Kernel { dim, family: Family::NearestNeighbor { weight } })
    }

    /// Kernel given by a table keyed on displacement classes. Keys may be any
    /// representative; they are canonicalized on insertion.
    pub fn tabulated(dim: usize, entries: impl IntoIterator<Item = (Point, f64)>) -> Result<Kernel> {
        check_dim(dim)?;
        let mut table = BTreeMap::new();
        for (p, w) in entries {
            p.check_dim(dim)?;
            if p.is_origin() {
                return Err(Error::ZeroDisplacement);
            }
            check_finite("table weight", w)?;
            if w < 0.0 {
                return Err(Error::InvalidParameter(format!("negative table weight {w}")));
            }
            table.insert(p.canonical_class(dim), w);
        }
        Ok(Kernel { dim, family: Family::Tabulated(table) })
    }

    /// `J̄(x) = J(x) + bonus·1{‖x‖ = 1}`.
    pub fn perturbed_nn(base: Kernel, nn_bonus: f64) -> Result<Kernel> {
        check_finite("nn_bonus", nn_bonus)?;
        if nn_bonus < 0.0 {
            return Err(Error::InvalidParameter(format!("nn_bonus must be nonnegative, got {nn_bonus}")));
        }
        Ok(Kernel { dim: base.dim, family: Family::PerturbedNn { base: Box::new(base), nn_bonus } })
    }

    /// `J_N(x) = J(x) 1{‖x‖ ≤ N}` (Euclidean norm).
    pub fn truncate(&self, radius: f64) -> Result<Kernel> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::InvalidParameter(format!("truncation radius must be positive, got {radius}")));
        }
        if radius.is_infinite() {
            return Ok(self.clone());
        }
        let (base, radius) = match &self.family {
            Family::Truncated { base, radius: r } => ((**base).clone(), r.min(radius)),
            _ => (self.clone(), radius),
        };
        Ok(Kernel { dim: self.dim, family: Family::Truncated { base: Box::new(base), radius } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// `J(x)`; rejects the zero displacement and extra coordinates.
    pub fn eval(&self, x: &Point) -> Result<f64> {
        x.check_dim(self.dim)?;
        if x.is_origin() {
            return Err(Error::ZeroDisplacement);
        }
        Ok(self.eval_class(&x.canonical_class(self.dim)))
    }

    /// Evaluation on an already canonical, non-zero class.
    pub(crate) fn eval_class(&self, class: &Point) -> f64 {
        match &self.family {
            Family::PowerLaw { prefactor, exponent } => {
                prefactor * (class.norm2_sq() as f64).powf(-exponent / 2.0)
            }
            Family::NearestNeighbor { weight } => {
                if class.norm2_sq() == 1 {
                    *weight
                } else {
                    0.0
                }
            }
            Family::Tabulated(t) => t.get(class).copied().unwrap_or(0.0),
            Family::Truncated { base, radius } => {
                if (class.norm2_sq() as f64) <= radius * radius {
                    base.eval_class(class)
                } else {
                    0.0
                }
            }
            Family::PerturbedNn { base, nn_bonus } => {
                let b = base.eval_class(class);
                if class.norm2_sq() == 1 {
                    b + nn_bonus
                } else {
                    b
                }
            }
        }
    }

    /// `1 − e^{−βJ(x)}`.
    pub fn open_probability(&self, beta: f64, x: &Point) -> Result<f64> {
        check_beta(beta)?;
        let j = self.eval(x)?;
        Ok(open_prob_from_weight(beta, j))
    }

    /// `J(A,B) = Σ_{x∈A} Σ_{y∈B} J(x−y)` for disjoint finite sets.
    pub fn mass(&self, a: &[Point], b: &[Point]) -> Result<f64> {
        let bset: std::collections::BTreeSet<&Point> = b.iter().collect();
        if a.iter().any(|x| bset.contains(x)) {
            return Err(Error::OverlappingSets);
        }
        let mut acc = Accumulator::default();
        for x in a {
            for y in b {
                acc.add(self.eval(&(*x - *y))?);
            }
        }
        Ok(acc.value())
    }

    /// Far-field form and the sup-norm radius beyond which it is exact.
    pub(crate) fn far_field(&self) -> (FarField, i64) {
        match &self.family {
            Family::PowerLaw { prefactor, exponent } => {
                (FarField::Power { prefactor: *prefactor, exponent: *exponent }, 0)
            }
            Family::NearestNeighbor { .. } => (FarField::Zero, 1),
            Family::Tabulated(t) => (FarField::Zero, t.keys().map(|p| p.linf()).max().unwrap_or(0)),
            Family::Truncated { radius, .. } => (FarField::Zero, radius.floor() as i64),
            Family::PerturbedNn { base, .. } => {
                let (f, e) = base.far_field();
                (f, e.max(1))
            }
        }
    }

    /// Largest sup-norm length with non-zero weight, if finite.
    pub fn support_linf(&self) -> Option<i64> {
        match self.far_field() {
            (FarField::Zero, e) => Some(e),
            _ => None,
        }
    }

    fn far_tail(&self, l: i64) -> Result<f64> {
        match self.far_field().0 {
            FarField::Zero => Ok(0.0),
            FarField::Power { prefactor, exponent } => {
                if exponent <= self.dim as f64 {
                    return Err(Error::DivergentTail { exponent, dim: self.dim });
                }
                Ok(prefactor * lattice_tail(self.dim, exponent, l))
            }
        }
    }

    /// `Σ_{‖x‖ > R} J(x)` (Euclidean radius), accurate to about 1e−14.
    pub fn tail_mass(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 0.0 {
            return Err(Error::InvalidParameter(format!("radius must be nonnegative, got {r}")));
        }
        let (_, exact) = self.far_field();
        if let Some(e) = self.support_linf() {
            if r >= (self.dim as f64).sqrt() * e as f64 {
                return Ok(0.0);
            }
        }
        let l = if r.is_finite() { exact.max(r.ceil() as i64) } else { return Ok(0.0) };
        let mut acc = Accumulator::default();
        let r2 = r * r;
        for_each_class(self.dim, l, |x, mult| {
            let p = Point::new(x);
            let n2 = p.norm2_sq();
            if n2 > 0 && (n2 as f64) > r2 {
                acc.add(mult as f64 * self.eval_class(&p));
            }
        });
        // every point with |x|_∞ > l ≥ R also has ‖x‖ > R
        acc.add(self.far_tail(l)?);
        Ok(acc.value())
    }

    /// `Σ_{x≠0} J(x)`.
    pub fn total_mass(&self) -> Result<f64> {
        self.tail_mass(0.0)
    }

    /// `Σ_{|x|_∞ > L} J(x)` (sup-norm radius).
    pub fn linf_tail(&self, l: i64) -> Result<f64> {
        let (_, exact) = self.far_field();
        let lp = exact.max(l);
        let mut acc = Accumulator::default();
        for shell in (l + 1)..=lp {
            for_each_shell_class(self.dim, shell, |x, mult| {
                acc.add(mult as f64 * self.eval_class(&Point::new(x)));
            });
        }
        acc.add(self.far_tail(lp)?);
        Ok(acc.value())
    }

    /// Sup-norm tails `Σ_{|x|_∞ > L} J(x)` for `L = 0..=lmax`, computed by
    /// subtracting shell sums from the total mass.
    pub fn linf_tail_profile(&self, lmax: i64) -> Result<Vec<f64>> {
        let total = self.total_mass()?;
        let mut out = Vec::with_capacity(lmax as usize + 1);
        let mut inner = Accumulator::default();
        out.push(total);
        for shell in 1..=lmax {
            for_each_shell_class(self.dim, shell, |x, mult| {
                inner.add(mult as f64 * self.eval_class(&Point::new(x)));
            });
            out.push((total - inner.value()).max(0.0));
        }
        Ok(out)
    }

    /// `Σ_x |J₁(x) − J₂(x)|`.
    pub fn l1_distance(&self, other: &Kernel) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let (f1, e1) = self.far_field();
        let (f2, e2) = other.far_field();
        let mut l = e1.max(e2);
        let tail = match (f1, f2) {
            (FarField::Zero, FarField::Zero) => None,
            (FarField::Power { prefactor: c1, exponent: s1 }, FarField::Power { prefactor: c2, exponent: s2 })
                if s1 != s2 =>
            {
                // c1 r^{-s1} − c2 r^{-s2} keeps one sign beyond the crossing radius
                let cross = (c1 / c2).powf(1.0 / (s1 - s2));
                if cross.is_finite() && cross > l as f64 {
                    l = cross.ceil() as i64;
                }
                Some(l)
            }
            _ => Some(l),
        };
        let mut acc = Accumulator::default();
        for_each_class(self.dim, l, |x, mult| {
            let p = Point::new(x);
            if p.norm2_sq() > 0 {
                acc.add(mult as f64 * (self.eval_class(&p) - other.eval_class(&p)).abs());
            }
        });
        if tail.is_some() {
            acc.add((self.far_tail(l)? - other.far_tail(l)?).abs());
        }
        Ok(acc.value())
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta < 0.0 || beta.is_infinite() {
        return Err(Error::InvalidParameter(format!("beta must be finite and nonnegative, got {beta}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn open_prob_from_weight(beta: f64, j: f64) -> f64 {
    -(-beta * j).exp_m1()
}

/// Rule for the long edges of a short-edge model.
#[derive(Clone, Debug, PartialEq)]
pub enum ShortRule {
    Zero,
    /// `γ ‖x‖^{-s}`
    PowerLaw { gamma: f64, exponent: f64 },
    /// `1 − e^{−βJ(x)}`
    FromKernel { kernel: Kernel, beta: f64 },
    /// `inner(x)` for `|x| ≤ n` and `γ/x²` beyond (one dimension only).
    Splice { inner: Box<ShortRule>, n: i64, gamma: f64 },
}

impl ShortRule {
    fn eval_class(&self, class: &Point) -> f64 {
        match self {
            ShortRule::Zero => 0.0,
            ShortRule::PowerLaw { gamma, exponent } => gamma * (class.norm2_sq() as f64).powf(-exponent / 2.0),
            ShortRule::FromKernel { kernel, beta } => open_prob_from_weight(*beta, kernel.eval_class(class)),
            ShortRule::Splice { inner, n, gamma } => {
                let r = class.linf();
                if r <= *n {
                    inner.eval_class(class)
                } else {
                    gamma / (r * r) as f64
                }
            }
        }
    }

    fn linf_tail(&self, dim: usize, l: i64) -> Result<f64> {
        Ok(match self {
            ShortRule::Zero => 0.0,
            ShortRule::PowerLaw { gamma, exponent } => {
                if *exponent <= dim as f64 {
                    return Err(Error::DivergentTail { exponent: *exponent, dim });
                }
                let mut t = gamma * lattice_tail(dim, *exponent, l.max(0));
                if l == 0 {
                    t -= gamma * 2.0 * dim as f64;
                }
                t.max(0.0)
            }
            ShortRule::FromKernel { kernel, beta } => beta * kernel.linf_tail(l)?,
            ShortRule::Splice { inner, n, gamma } => {
                let mut acc = Accumulator::default();
                for x in (l + 1).max(2)..=*n {
                    acc.add(2.0 * inner.eval_class(&Point::new(&[x])));
                }
                acc.add(2.0 * gamma * sums::power_tail(2.0, (*n).max(l) + 1));
                acc.value()
            }
        })
    }
}

/// Model in which nearest-neighbour edges open with probability `p` and every
/// other edge `{x, y}` opens with probability `f(x − y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortEdgeFunction {
    dim: usize,
    nn_probability: f64,
    rule: ShortRule,
}

impl ShortEdgeFunction {
    pub fn new(dim: usize, nn_probability: f64, rule: ShortRule) -> Result<ShortEdgeFunction> {
        check_dim(dim)?;
        if !(0.0..=1.0).contains(&nn_probability) {
            return Err(Error::InvalidParameter(format!("p must lie in [0,1], got {nn_probability}")));
        }
        validate_rule(dim, &rule)?;
        Ok(ShortEdgeFunction { dim, nn_probability, rule })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nn_probability(&self) -> f64 {
        self.nn_probability
    }

    pub fn rule(&self) -> &ShortRule {
        &self.rule
    }

    pub fn with_nn_probability(&self, p: f64) -> Result<ShortEdgeFunction> {
        ShortEdgeFunction::new(self.dim, p, self.rule.clone())
    }

    /// `f(x)`, the probability used for a non-unit displacement.
    pub fn f(&self, x: &Point) -> Result<f64> {
        x.check_dim(self.dim)?;
        if x.is_origin() {
            return Err(Error::ZeroDisplacement);
        }
        Ok(self.rule.eval_class(&x.canonical_class(self.dim)))
    }

    /// Opening probability of an edge with displacement `x`.
    pub fn open_probability(&self, x: &Point) -> Result<f64> {
        x.check_dim(self.dim)?;
        if x.is_origin() {
            return Err(Error::ZeroDisplacement);
        }
        Ok(self.open_probability_class(&x.canonical_class(self.dim)))
    }

    pub(crate) fn open_probability_class(&self, class: &Point) -> f64 {
        if class.norm2_sq() == 1 {
            self.nn_probability
        } else {
            self.rule.eval_class(class)
        }
    }

    /// `Σ_{|x|_∞ > L, ‖x‖ > 1} f(x)`, or an upper bound for kernel-derived rules.
    pub fn linf_tail(&self, l: i64) -> Result<f64> {
        self.rule.linf_tail(self.dim, l)
    }

    /// Sum of `|f(x) − g(x)|` over non-unit displacements with `|x|_∞ ≤ cutoff`.
    pub fn l1_gap(&self, other: &ShortEdgeFunction, cutoff: i64) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut acc = Accumulator::default();
        for_each_class(self.dim, cutoff, |x, mult| {
            let p = Point::new(x);
            if p.norm2_sq() > 1 {
                acc.add(mult as f64 * (self.rule.eval_class(&p) - other.rule.eval_class(&p)).abs());
            }
        });
        Ok(acc.value())
    }
}

fn validate_rule(dim: usize, rule: &ShortRule) -> Result<()> {
    let min_far = if dim == 1 { Point::new(&[2]) } else { Point::new(&[1, 1]) };
    match rule {
        ShortRule::Zero => Ok(()),
        ShortRule::PowerLaw { gamma, exponent } => {
            check_finite("gamma", *gamma)?;
            if *gamma < 0.0 {
                return Err(Error::InvalidParameter("gamma must be nonnegative".into()));
            }
            if *exponent <= dim as f64 {
                return Err(Error::DivergentTail { exponent: *exponent, dim });
            }
            if rule.eval_class(&min_far) >= 1.0 {
                return Err(Error::InvalidParameter("f must stay below 1".into()));
            }
            Ok(())
        }
        ShortRule::FromKernel { kernel, beta } => {
            check_beta(*beta)?;
            if kernel.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: kernel.dim() });
            }
            Ok(())
        }
        ShortRule::Splice { inner, n, gamma } => {
            if dim != 1 {
                return Err(Error::DimensionMismatch { expected: 1, got: dim });
            }
            if *n < 1 {
                return Err(Error::InvalidParameter(format!("splice radius must be positive, got {n}")));
            }
            if *gamma / ((n + 1) * (n + 1)) as f64 >= 1.0 {
                return Err(Error::InvalidParameter("γ/(n+1)² must stay below 1".into()));
            }
            validate_rule(dim, inner)
        }
    }
}

/// `f_n(x) = f(x)` for `|x| ≤ n` and `γ/x²` for `|x| > n`, in one dimension.
pub fn make_counterexample_1d(f: &ShortEdgeFunction, gamma: f64, n: i64) -> Result<ShortEdgeFunction> {
    if f.dim != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: f.dim });
    }
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
    }
    let rule = ShortRule::Splice { inner: Box::new(f.rule.clone()), n, gamma };
    ShortEdgeFunction::new(1, f.nn_probability, rule)
}

/// Riemann-type constants used by tests and callers.
pub fn lattice_power_sum(dim: usize, s: f64) -> Result<f64> {
    check_dim(dim)?;
    if s <= dim as f64 {
        return Err(Error::DivergentTail { exponent: s, dim });
    }
    Ok(lattice_zeta(dim, s))
}
