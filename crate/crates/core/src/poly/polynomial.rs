use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{usage, Result};
use crate::group::GroupPoint;
use crate::report::Num;

/// Coefficients at or below this fraction of the largest coefficient are
/// dropped after every operator application.
pub const PRUNE_RELATIVE: f64 = 1e-14;

/// Sparse polynomial in `(x_1..x_n, y_1..y_n, z)` keyed by exponent vectors of
/// length `2n + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HPolynomial {
    n: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

/// Heisenberg weight `Σa_i + Σb_i + 2c` of an exponent vector.
pub fn monomial_weight(exps: &[u32]) -> u32 {
    let last = exps.len() - 1;
    exps[..last].iter().sum::<u32>() + 2 * exps[last]
}

impl HPolynomial {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1, "H_n needs n >= 1");
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::monomial(n, vec![0; 2 * n + 1], c)
    }

    /// The coordinate function with stacked index `var`.
    pub fn coordinate(n: usize, var: usize) -> Self {
        let mut e = vec![0; 2 * n + 1];
        e[var] = 1;
        Self::monomial(n, e, 1.0)
    }

    pub fn monomial(n: usize, exps: Vec<u32>, coeff: f64) -> Self {
        assert_eq!(exps.len(), 2 * n + 1, "exponent vector length must be 2n+1");
        let mut p = Self::zero(n);
        if coeff != 0.0 {
            p.terms.insert(exps, coeff);
        }
        p
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut p = Self::zero(n);
        for (e, c) in terms {
            if e.len() != 2 * n + 1 {
                return usage(format!("exponent vector of length {} for n={n}", e.len()));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    /// Largest monomial weight; 0 for the zero polynomial.
    pub fn weight(&self) -> u32 {
        self.terms.keys().map(|e| monomial_weight(e)).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub(crate) fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(exps);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = *o.get() + c;
                if v == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    /// Drops coefficients at or below `PRUNE_RELATIVE` times the largest one.
    pub fn pruned(mut self) -> Self {
        let cut = PRUNE_RELATIVE * self.max_abs_coeff();
        self.terms.retain(|_, c| c.abs() > cut);
        self
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero(self.n);
        }
        Self {
            n: self.n,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
    }

    /// `∂P/∂(var)` for a stacked coordinate index.
    pub fn partial(&self, var: usize) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            if e[var] > 0 {
                let mut d = e.clone();
                d[var] -= 1;
                out.add_term(d, c * e[var] as f64);
            }
        }
        out
    }

    /// `coord_var · P`.
    pub fn mul_var(&self, var: usize) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let mut m = e.clone();
                    m[var] += 1;
                    (m, *c)
                })
                .collect(),
        }
    }

    pub fn eval_coords(&self, c: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, k)| {
                e.iter()
                    .zip(c)
                    .filter(|(p, _)| **p > 0)
                    .fold(*k, |acc, (p, v)| acc * v.powi(*p as i32))
            })
            .sum()
    }

    pub fn eval(&self, p: &GroupPoint) -> Result<f64> {
        if p.n() != self.n {
            return usage(format!("polynomial on H_{} evaluated on H_{}", self.n, p.n()));
        }
        Ok(self.eval_coords(&p.coords()))
    }

    /// True when every coefficient is at most `tol · scale` in magnitude.
    pub fn is_negligible(&self, scale: f64, tol: f64) -> bool {
        self.max_abs_coeff() <= tol * scale
    }

    /// Coefficientwise relative distance `max|a−b| / max(max|a|, max|b|, tiny)`.
    pub fn relative_distance(&self, other: &HPolynomial) -> f64 {
        let diff = (self - other).max_abs_coeff();
        let scale = self.max_abs_coeff().max(other.max_abs_coeff());
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    fn check_same_n(&self, other: &HPolynomial) {
        assert_eq!(self.n, other.n, "polynomials on different H_n");
    }
}

impl Add for &HPolynomial {
    type Output = HPolynomial;
    fn add(self, rhs: &HPolynomial) -> HPolynomial {
        self.check_same_n(rhs);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }
}

impl Sub for &HPolynomial {
    type Output = HPolynomial;
    fn sub(self, rhs: &HPolynomial) -> HPolynomial {
        self.check_same_n(rhs);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -*c);
        }
        out
    }
}

impl Neg for &HPolynomial {
    type Output = HPolynomial;
    fn neg(self) -> HPolynomial {
        self.scale(-1.0)
    }
}

impl Mul for &HPolynomial {
    type Output = HPolynomial;
    fn mul(self, rhs: &HPolynomial) -> HPolynomial {
        self.check_same_n(rhs);
        let mut out = HPolynomial::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

/// Every exponent vector on `H_n` with Heisenberg weight at most `max_weight`,
/// in lexicographic order.
pub fn basis_monomials(n: usize, max_weight: u32) -> Vec<Vec<u32>> {
    fn rec(slot: usize, dim: usize, budget: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slot == dim {
            out.push(cur.clone());
            return;
        }
        let w = if slot == dim - 1 { 2 } else { 1 };
        let mut e = 0;
        while e * w <= budget {
            cur.push(e);
            rec(slot + 1, dim, budget - e * w, cur, out);
            cur.pop();
            e += 1;
        }
    }
    let mut out = Vec::new();
    rec(0, 2 * n + 1, max_weight, &mut Vec::new(), &mut out);
    out
}

#[derive(Serialize, Deserialize)]
struct PolyWire {
    n: usize,
    terms: Vec<(Vec<u32>, Num)>,
}

impl Serialize for HPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyWire {
            n: self.n,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), Num(*c))).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = PolyWire::deserialize(d)?;
        if wire.n == 0 {
            return Err(serde::de::Error::custom("n must be at least 1"));
        }
        HPolynomial::from_terms(wire.n, wire.terms.into_iter().map(|(e, c)| (e, c.0)))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_and_basis() {
        assert_eq!(monomial_weight(&[1, 2, 3]), 9);
        let b = basis_monomials(1, 2);
        // 1, z, y, y², x, xy, x²
        assert_eq!(b.len(), 7);
        assert!(b.iter().all(|e| monomial_weight(e) <= 2));
        let z2 = HPolynomial::monomial(1, vec![0, 0, 2], 1.0);
        assert_eq!(z2.weight(), 4);
        assert_eq!(HPolynomial::zero(2).weight(), 0);
    }

    #[test]
    fn eval_examples() {
        let p = GroupPoint::new(vec![0.0], vec![2.0], 5.0).unwrap();
        assert_eq!(HPolynomial::zero(1).eval(&p).unwrap(), 0.0);
        let zy = &HPolynomial::coordinate(1, 2) + &HPolynomial::coordinate(1, 1).scale(0.5);
        assert_eq!(zy.eval(&p).unwrap(), 6.0);
        let q = &HPolynomial::monomial(1, vec![2, 0, 0], 0.25)
            + &HPolynomial::monomial(1, vec![0, 2, 0], 0.25);
        let at = GroupPoint::new(vec![2.0], vec![0.0], 0.0).unwrap();
        assert_eq!(q.eval(&at).unwrap(), 1.0);
        assert!(q.eval(&GroupPoint::identity(2)).is_err());
    }

    #[test]
    fn cancellation_removes_terms() {
        let x = HPolynomial::coordinate(1, 0);
        assert!((&x - &x).is_zero());
        let sq = &x * &x;
        assert_eq!(sq.coefficient(&[2, 0, 0]), 1.0);
        assert_eq!(sq.partial(0).coefficient(&[1, 0, 0]), 2.0);
    }

    #[test]
    fn pruning_is_relative() {
        let p = HPolynomial::from_terms(1, [(vec![1, 0, 0], 1.0), (vec![0, 1, 0], 1e-16)]).unwrap();
        assert_eq!(p.clone().pruned().len(), 1);
        let q = HPolynomial::from_terms(1, [(vec![1, 0, 0], 1e-20), (vec![0, 1, 0], 1e-21)]).unwrap();
        assert_eq!(q.pruned().len(), 2);
    }

    #[test]
    fn json_keeps_coefficients_exact() {
        let p = HPolynomial::from_terms(
            2,
            [(vec![1, 0, 0, 1, 2], 0.1), (vec![0, 0, 0, 0, 0], -1.0 / 3.0)],
        )
        .unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: HPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
