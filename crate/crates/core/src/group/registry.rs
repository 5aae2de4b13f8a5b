//! Named test functions with analytic derivatives.
//!
//! Polynomial entries are backed by [`PolyFunction`], so their derivatives are
//! exact. `gauss_bump` and `exp_linear` carry hand-written closed forms.

use std::sync::Arc;

use super::function::{Capabilities, SmoothFunction, SymMatrix};
use super::point::GroupPoint;
use crate::error::{usage, Result};
use crate::poly::{HPolynomial, PolyFunction};

/// A coordinate of `H_n`, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coord {
    X(usize),
    Y(usize),
    Z,
}

impl Coord {
    pub fn stacked_index(&self, n: usize) -> usize {
        match *self {
            Coord::X(i) => i - 1,
            Coord::Y(i) => n + i - 1,
            Coord::Z => 2 * n,
        }
    }
}

pub fn coordinate(n: usize, c: Coord) -> PolyFunction {
    PolyFunction::new(HPolynomial::coordinate(n, c.stacked_index(n)))
}

pub fn constant(n: usize, c: f64) -> PolyFunction {
    PolyFunction::named(HPolynomial::constant(n, c), format!("const({c})"))
}

/// `exp(−|x|² − |y|² − z²)`.
#[derive(Clone, Debug)]
pub struct GaussBump {
    pub n: usize,
}

impl GaussBump {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl SmoothFunction for GaussBump {
    fn n(&self) -> usize {
        self.n
    }
    fn name(&self) -> String {
        "gauss_bump".into()
    }
    fn value(&self, p: &GroupPoint) -> f64 {
        (-p.coords().iter().map(|v| v * v).sum::<f64>()).exp()
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities::FULL
    }
    fn gradient(&self, p: &GroupPoint) -> Option<Vec<f64>> {
        let f = self.value(p);
        Some(p.coords().iter().map(|c| -2.0 * c * f).collect())
    }
    fn hessian(&self, p: &GroupPoint) -> Option<SymMatrix> {
        let f = self.value(p);
        let c = p.coords();
        let mut h = SymMatrix::zeros(c.len());
        for i in 0..c.len() {
            for j in i..c.len() {
                let delta = if i == j { 2.0 } else { 0.0 };
                h.set(i, j, f * (4.0 * c[i] * c[j] - delta));
            }
        }
        Some(h)
    }
    fn bounded_derivatives(&self) -> bool {
        true
    }
}

/// `exp(λ x_1 / 2)`; its square `exp(λ x_1)` saturates the Gaussian
/// log-Sobolev inequality. Unbounded, so outside the bounded-derivative class.
#[derive(Clone, Debug)]
pub struct ExpLinear {
    pub n: usize,
    pub lambda: f64,
}

impl ExpLinear {
    pub fn new(n: usize, lambda: f64) -> Self {
        Self { n, lambda }
    }
}

impl SmoothFunction for ExpLinear {
    fn n(&self) -> usize {
        self.n
    }
    fn name(&self) -> String {
        format!("exp_linear({})", self.lambda)
    }
    fn value(&self, p: &GroupPoint) -> f64 {
        (0.5 * self.lambda * p.x[0]).exp()
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities::FULL
    }
    fn gradient(&self, p: &GroupPoint) -> Option<Vec<f64>> {
        let mut g = vec![0.0; 2 * self.n + 1];
        g[0] = 0.5 * self.lambda * self.value(p);
        Some(g)
    }
    fn hessian(&self, p: &GroupPoint) -> Option<SymMatrix> {
        let mut h = SymMatrix::zeros(2 * self.n + 1);
        h.set(0, 0, 0.25 * self.lambda * self.lambda * self.value(p));
        Some(h)
    }
}

/// Parses a monomial name such as `x1`, `z2`, `x1y1`, `x1^2`, `x1z` or
/// `x1^2y2z^3`. `z2` is read as `z^2`.
fn parse_monomial(name: &str, n: usize) -> Option<Vec<u32>> {
    let mut exps = vec![0u32; 2 * n + 1];
    let bytes = name.as_bytes();
    let mut i = 0;
    let read_num = |i: &mut usize| -> Option<usize> {
        let start = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        if start == *i {
            None
        } else {
            name[start..*i].parse().ok()
        }
    };
    while i < bytes.len() {
        let var = bytes[i];
        i += 1;
        let slot = match var {
            b'x' | b'y' => {
                let idx = read_num(&mut i)?;
                if idx == 0 || idx > n {
                    return None;
                }
                if var == b'x' {
                    idx - 1
                } else {
                    n + idx - 1
                }
            }
            b'z' => {
                if i < bytes.len() && bytes[i].is_ascii_digit() {
                    // z2 means z^2
                    let e = read_num(&mut i)? as u32;
                    exps[2 * n] += e;
                    continue;
                }
                2 * n
            }
            _ => return None,
        };
        let mut e = 1u32;
        if i < bytes.len() && bytes[i] == b'^' {
            i += 1;
            e = read_num(&mut i)? as u32;
        }
        exps[slot] += e;
    }
    Some(exps)
}

/// The monomial named `name` (see [`by_name`]) with coefficient 1.
pub fn monomial(name: &str, n: usize) -> Result<HPolynomial> {
    match parse_monomial(name, n) {
        Some(exps) => Ok(HPolynomial::monomial(n, exps, 1.0)),
        None => usage(format!("unknown monomial {name} for n={n}")),
    }
}

/// Looks a function up by name: `const`, `gauss_bump`, `exp_linear:<λ>`,
/// or a monomial name understood by the parser above.
pub fn by_name(name: &str, n: usize) -> Result<Arc<dyn SmoothFunction>> {
    if n == 0 {
        return usage("n must be at least 1");
    }
    if name == "const" || name == "one" {
        return Ok(Arc::new(constant(n, 1.0)));
    }
    if name == "gauss_bump" {
        return Ok(Arc::new(GaussBump { n }));
    }
    if let Some(rest) = name.strip_prefix("exp_linear") {
        let lambda = match rest.strip_prefix(':') {
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| crate::Error::Usage(format!("bad λ in {name}")))?,
            None if rest.is_empty() => 1.0,
            None => return usage(format!("unknown function {name}")),
        };
        return Ok(Arc::new(ExpLinear { n, lambda }));
    }
    match parse_monomial(name, n) {
        Some(exps) => Ok(Arc::new(PolyFunction::named(
            HPolynomial::monomial(n, exps, 1.0),
            name.to_string(),
        ))),
        None => usage(format!("unknown function {name} for n={n}")),
    }
}

/// The standard battery for the inequality checks.
pub const BATTERY: [&str; 6] = ["x1", "y1", "z", "z2", "x1y1", "gauss_bump"];

pub fn battery(n: usize) -> Vec<Arc<dyn SmoothFunction>> {
    BATTERY
        .iter()
        .map(|name| by_name(name, n).expect("battery names parse"))
        .collect()
}
