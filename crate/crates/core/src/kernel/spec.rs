//! Compact text form of kernels and short-edge functions, e.g.
//! `truncated(N=8,power_law(C=1,s=4))` or `pf(p=0.5,f=splice(n=4,gamma=1.5,zero))`.
//! The dimension is carried separately. Floats use Rust's shortest
//! round-trip formatting, so `parse(format(k)) == k`.

use super::{Family, Kernel, ShortEdgeFunction, ShortRule};
use crate::error::{Error, Result};
use crate::lattice::Point;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Atom(String),
    Term(Term),
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    name: String,
    args: Vec<(Option<String>, Value)>,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

fn perr(msg: impl Into<String>) -> Error {
    Error::ConfigParse(msg.into())
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn token(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if matches!(c, b'(' | b')' | b',' | b'=') {
                break;
            }
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).trim().to_string()
    }

    fn value_from(&mut self, tok: String) -> Result<Value> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let mut args = Vec::new();
            if self.peek() == Some(b')') {
                self.pos += 1;
                return Ok(Value::Term(Term { name: tok, args }));
            }
            loop {
                let t = self.token();
                if self.peek() == Some(b'=') {
                    self.pos += 1;
                    let vt = self.token();
                    let v = self.value_from(vt)?;
                    args.push((Some(t), v));
                } else {
                    let v = self.value_from(t)?;
                    args.push((None, v));
                }
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(perr(format!("unterminated argument list at offset {}", self.pos))),
                }
            }
            Ok(Value::Term(Term { name: tok, args }))
        } else if tok.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && !is_number(&tok) {
            Ok(Value::Term(Term { name: tok, args: Vec::new() }))
        } else {
            Ok(Value::Atom(tok))
        }
    }

    fn parse(s: &str) -> Result<Term> {
        let mut p = Parser { s: s.trim().as_bytes(), pos: 0 };
        let tok = p.token();
        let v = p.value_from(tok)?;
        if p.pos != p.s.len() {
            return Err(perr(format!("trailing input in `{s}`")));
        }
        match v {
            Value::Term(t) => Ok(t),
            Value::Atom(a) => Err(perr(format!("expected a family name, got `{a}`"))),
        }
    }
}

fn is_number(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

impl Term {
    fn num(&self, key: &str) -> Result<f64> {
        for (k, v) in &self.args {
            if k.as_deref() == Some(key) {
                return match v {
                    Value::Atom(a) => a.parse::<f64>().map_err(|e| perr(format!("`{key}={a}`: {e}"))),
                    Value::Term(t) => Err(perr(format!("`{key}` expects a number, got `{}`", t.name))),
                };
            }
        }
        Err(perr(format!("`{}` is missing `{key}`", self.name)))
    }

    fn int(&self, key: &str) -> Result<i64> {
        let v = self.num(key)?;
        if v.fract() != 0.0 {
            return Err(perr(format!("`{key}` must be an integer")));
        }
        Ok(v as i64)
    }

    fn term(&self, key: Option<&str>) -> Result<&Term> {
        for (k, v) in &self.args {
            if k.as_deref() == key {
                if let Value::Term(t) = v {
                    return Ok(t);
                }
            }
        }
        Err(perr(format!("`{}` is missing a nested term", self.name)))
    }

    fn check_keys(&self, allowed: &[&str], nested: usize) -> Result<()> {
        let mut n = 0;
        for (k, _) in &self.args {
            match k {
                Some(k) if allowed.contains(&k.as_str()) => {}
                Some(k) => return Err(perr(format!("unknown key `{k}` in `{}`", self.name))),
                None => n += 1,
            }
        }
        if n != nested {
            return Err(perr(format!("`{}` expects {nested} nested term(s)", self.name)));
        }
        Ok(())
    }
}

fn kernel_from_term(t: &Term, dim: usize) -> Result<Kernel> {
    match t.name.as_str() {
        "power_law" => {
            t.check_keys(&["C", "s"], 0)?;
            Kernel::power_law(dim, t.num("C")?, t.num("s")?)
        }
        "nearest_neighbor" | "nn" => {
            t.check_keys(&["w"], 0)?;
            Kernel::nearest_neighbor(dim, t.num("w")?)
        }
        "truncated" => {
            t.check_keys(&["N"], 1)?;
            kernel_from_term(t.term(None)?, dim)?.truncate(t.num("N")?)
        }
        "perturbed_nn" => {
            t.check_keys(&["bonus"], 1)?;
            Kernel::perturbed_nn(kernel_from_term(t.term(None)?, dim)?, t.num("bonus")?)
        }
        "tabulated" => {
            let mut entries = Vec::new();
            for (k, v) in &t.args {
                let k = k.as_ref().ok_or_else(|| perr("tabulated entries need `class=weight`"))?;
                let coords: std::result::Result<Vec<i64>, _> = k.split(';').map(|c| c.trim().parse()).collect();
                let coords = coords.map_err(|e| perr(format!("bad class `{k}`: {e}")))?;
                if coords.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: coords.len() });
                }
                let w = match v {
                    Value::Atom(a) => a.parse::<f64>().map_err(|e| perr(format!("bad weight `{a}`: {e}")))?,
                    Value::Term(_) => return Err(perr("tabulated weights must be numbers")),
                };
                entries.push((Point::new(&coords), w));
            }
            Kernel::tabulated(dim, entries)
        }
        other => Err(perr(format!("unknown kernel family `{other}`"))),
    }
}

fn rule_from_term(t: &Term, dim: usize) -> Result<ShortRule> {
    match t.name.as_str() {
        "zero" => {
            t.check_keys(&[], 0)?;
            Ok(ShortRule::Zero)
        }
        "power" => {
            t.check_keys(&["gamma", "s"], 0)?;
            Ok(ShortRule::PowerLaw { gamma: t.num("gamma")?, exponent: t.num("s")? })
        }
        "kernel" => {
            t.check_keys(&["beta"], 1)?;
            Ok(ShortRule::FromKernel { kernel: kernel_from_term(t.term(None)?, dim)?, beta: t.num("beta")? })
        }
        "splice" => {
            t.check_keys(&["n", "gamma"], 1)?;
            Ok(ShortRule::Splice {
                inner: Box::new(rule_from_term(t.term(None)?, dim)?),
                n: t.int("n")?,
                gamma: t.num("gamma")?,
            })
        }
        other => Err(perr(format!("unknown short-edge rule `{other}`"))),
    }
}

impl Kernel {
    /// Parses the compact form produced by `Display`.
    pub fn parse(s: &str, dim: usize) -> Result<Kernel> {
        kernel_from_term(&Parser::parse(s)?, dim)
    }
}

impl ShortEdgeFunction {
    /// Parses `pf(p=<prob>,f=<rule>)`.
    pub fn parse(s: &str, dim: usize) -> Result<ShortEdgeFunction> {
        let t = Parser::parse(s)?;
        if t.name != "pf" {
            return Err(perr(format!("expected `pf(...)`, got `{}`", t.name)));
        }
        t.check_keys(&["p", "f"], 0)?;
        let rule = rule_from_term(t.term(Some("f"))?, dim)?;
        ShortEdgeFunction::new(dim, t.num("p")?, rule)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::PowerLaw { prefactor, exponent } => write!(f, "power_law(C={prefactor},s={exponent})"),
            Family::NearestNeighbor { weight } => write!(f, "nearest_neighbor(w={weight})"),
            Family::Truncated { base, radius } => write!(f, "truncated(N={radius},{base})"),
            Family::PerturbedNn { base, nn_bonus } => write!(f, "perturbed_nn(bonus={nn_bonus},{base})"),
            Family::Tabulated(t) => {
                let items: Vec<String> = t
                    .iter()
                    .map(|(k, w)| {
                        let c: Vec<String> = k.coords(self.dim).iter().map(|c| c.to_string()).collect();
                        format!("{}={w}", c.join(";"))
                    })
                    .collect();
                write!(f, "tabulated({})", items.join(","))
            }
        }
    }
}

impl fmt::Display for ShortRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShortRule::Zero => write!(f, "zero"),
            ShortRule::PowerLaw { gamma, exponent } => write!(f, "power(gamma={gamma},s={exponent})"),
            ShortRule::FromKernel { kernel, beta } => write!(f, "kernel(beta={beta},{kernel})"),
            ShortRule::Splice { inner, n, gamma } => write!(f, "splice(n={n},gamma={gamma},{inner})"),
        }
    }
}

impl fmt::Display for ShortEdgeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pf(p={},f={})", self.nn_probability, self.rule)
    }
}
