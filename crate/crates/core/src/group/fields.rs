use std::fmt;

use serde::{Deserialize, Serialize};

use super::function::{FiniteDiff, SmoothFunction, SymMatrix};
use super::point::GroupPoint;
use crate::error::{usage, Error, Result};

/// The six invariant vector fields on `H_n`.
///
/// Left invariant: `X_i = ∂x_i − (y_i/2)∂z`, `Y_i = ∂y_i + (x_i/2)∂z`, `Z = ∂z`.
/// Right invariant: `X̂_i = ∂x_i + (y_i/2)∂z`, `Ŷ_i = ∂y_i − (x_i/2)∂z`, `Ẑ = ∂z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldKind {
    X,
    Y,
    Z,
    Xhat,
    Yhat,
    Zhat,
}

impl FieldKind {
    pub fn is_right_invariant(self) -> bool {
        matches!(self, FieldKind::Xhat | FieldKind::Yhat | FieldKind::Zhat)
    }
}

/// A vector field together with its 1-based index. The index is ignored for
/// `Z` and `Zhat`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldId {
    pub kind: FieldKind,
    pub index: usize,
}

impl FieldId {
    pub fn new(kind: FieldKind, index: usize) -> Self {
        Self { kind, index }
    }
    pub fn x(i: usize) -> Self {
        Self::new(FieldKind::X, i)
    }
    pub fn y(i: usize) -> Self {
        Self::new(FieldKind::Y, i)
    }
    pub fn z() -> Self {
        Self::new(FieldKind::Z, 1)
    }
    pub fn xhat(i: usize) -> Self {
        Self::new(FieldKind::Xhat, i)
    }
    pub fn yhat(i: usize) -> Self {
        Self::new(FieldKind::Yhat, i)
    }

    pub fn is_vertical(&self) -> bool {
        matches!(self.kind, FieldKind::Z | FieldKind::Zhat)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !self.is_vertical() && (self.index == 0 || self.index > n) {
            return usage(format!("field index {} outside 1..={n}", self.index));
        }
        Ok(())
    }

    /// Left-invariant horizontal fields `X_1..X_n, Y_1..Y_n` in order.
    pub fn horizontal(n: usize) -> Vec<FieldId> {
        (1..=n).map(Self::x).chain((1..=n).map(Self::y)).collect()
    }

    /// Decomposition `F = ∂_a + s·(coord_c)/2·∂z` used by both the pointwise
    /// and the polynomial implementations: returns `(a, Some((c, s)))` in
    /// stacked 0-based coordinates, with `a = 2n` for the vertical fields.
    pub(crate) fn parts(&self, n: usize) -> (usize, Option<(usize, f64)>) {
        let i = self.index.saturating_sub(1);
        match self.kind {
            FieldKind::X => (i, Some((n + i, -1.0))),
            FieldKind::Y => (n + i, Some((i, 1.0))),
            FieldKind::Xhat => (i, Some((n + i, 1.0))),
            FieldKind::Yhat => (n + i, Some((i, -1.0))),
            FieldKind::Z | FieldKind::Zhat => (2 * n, None),
        }
    }

    /// Coefficient vector of the field at stacked coordinates `c`.
    pub(crate) fn coefficients(&self, c: &[f64]) -> Vec<f64> {
        let n = (c.len() - 1) / 2;
        let mut out = vec![0.0; c.len()];
        let (a, twist) = self.parts(n);
        out[a] = 1.0;
        if let Some((k, s)) = twist {
            out[2 * n] += 0.5 * s * c[k];
        }
        out
    }

    /// Constant derivatives `∂_k (coefficient_l)` as a sparse list `(k, l, v)`.
    fn coefficient_jacobian(&self, n: usize) -> Option<(usize, usize, f64)> {
        let (_, twist) = self.parts(n);
        twist.map(|(k, s)| (k, 2 * n, 0.5 * s))
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FieldKind::X => write!(f, "X{}", self.index),
            FieldKind::Y => write!(f, "Y{}", self.index),
            FieldKind::Z => write!(f, "Z"),
            FieldKind::Xhat => write!(f, "Xhat{}", self.index),
            FieldKind::Yhat => write!(f, "Yhat{}", self.index),
            FieldKind::Zhat => write!(f, "Zhat"),
        }
    }
}

/// How to obtain derivatives a function does not provide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Derivatives {
    #[default]
    Analytic,
    FiniteDifference,
}

fn check_dims<F: SmoothFunction + ?Sized>(f: &F, p: &GroupPoint) -> Result<()> {
    if f.n() != p.n() {
        return usage(format!(
            "function on H_{} evaluated at a point of H_{}",
            f.n(),
            p.n()
        ));
    }
    Ok(())
}

fn gradient_of<F: SmoothFunction + ?Sized>(f: &F, p: &GroupPoint) -> Result<Vec<f64>> {
    f.gradient(p)
        .ok_or_else(|| Error::Capability(format!("{} provides no gradient", f.name())))
}

fn hessian_of<F: SmoothFunction + ?Sized>(
    f: &F,
    p: &GroupPoint,
    policy: Derivatives,
) -> Result<(Vec<f64>, SymMatrix)> {
    match policy {
        Derivatives::Analytic => {
            let h = f
                .hessian(p)
                .ok_or_else(|| Error::Capability(format!("{} provides no hessian", f.name())))?;
            Ok((gradient_of(f, p)?, h))
        }
        Derivatives::FiniteDifference => {
            let fd = FiniteDiff(f);
            Ok((fd.gradient(p).unwrap(), fd.hessian(p).unwrap()))
        }
    }
}

/// First-order derivative of `f` along `field` at `p`.
pub fn apply_field<F: SmoothFunction + ?Sized>(field: FieldId, f: &F, p: &GroupPoint) -> Result<f64> {
    check_dims(f, p)?;
    field.validate(p.n())?;
    let g = gradient_of(f, p)?;
    Ok(dot(&field.coefficients(&p.coords()), &g))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn second_order(outer: FieldId, inner: FieldId, c: &[f64], g: &[f64], h: &SymMatrix) -> f64 {
    let n = (c.len() - 1) / 2;
    let a = outer.coefficients(c);
    let b = inner.coefficients(c);
    let mut acc = 0.0;
    for (k, ak) in a.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        for (l, bl) in b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            acc += ak * bl * h.get(k, l);
        }
    }
    // Outer field differentiating the inner field's coefficients.
    if let Some((k, l, v)) = inner.coefficient_jacobian(n) {
        acc += a[k] * v * g[l];
    }
    acc
}

/// Second-order derivative `outer(inner f)` at `p`.
pub fn apply_field_pair<F: SmoothFunction + ?Sized>(
    outer: FieldId,
    inner: FieldId,
    f: &F,
    p: &GroupPoint,
    policy: Derivatives,
) -> Result<f64> {
    check_dims(f, p)?;
    outer.validate(p.n())?;
    inner.validate(p.n())?;
    let (g, h) = hessian_of(f, p, policy)?;
    Ok(second_order(outer, inner, &p.coords(), &g, &h))
}

/// Commutator `[a, b] f = a(b f) − b(a f)` at `p`.
pub fn bracket<F: SmoothFunction + ?Sized>(
    a: FieldId,
    b: FieldId,
    f: &F,
    p: &GroupPoint,
    policy: Derivatives,
) -> Result<f64> {
    check_dims(f, p)?;
    a.validate(p.n())?;
    b.validate(p.n())?;
    let (g, h) = hessian_of(f, p, policy)?;
    let c = p.coords();
    Ok(second_order(a, b, &c, &g, &h) - second_order(b, a, &c, &g, &h))
}

/// Sub-Laplacian `L f = ½ Σ_i (X_i² + Y_i²) f` at `p`; needs an analytic
/// Hessian.
pub fn generator_apply<F: SmoothFunction + ?Sized>(f: &F, p: &GroupPoint) -> Result<f64> {
    generator_apply_with(f, p, Derivatives::Analytic)
}

pub fn generator_apply_with<F: SmoothFunction + ?Sized>(
    f: &F,
    p: &GroupPoint,
    policy: Derivatives,
) -> Result<f64> {
    check_dims(f, p)?;
    let (g, h) = hessian_of(f, p, policy)?;
    let c = p.coords();
    let total: f64 = FieldId::horizontal(p.n())
        .into_iter()
        .map(|fld| second_order(fld, fld, &c, &g, &h))
        .sum();
    Ok(0.5 * total)
}

/// `(X_1 f, …, X_n f, Y_1 f, …, Y_n f)` at `p`.
pub fn horizontal_gradient<F: SmoothFunction + ?Sized>(f: &F, p: &GroupPoint) -> Result<Vec<f64>> {
    check_dims(f, p)?;
    let g = gradient_of(f, p)?;
    Ok(horizontal_from_gradient(&p.x, &p.y, &g))
}

/// Horizontal gradient from a Euclidean gradient at `(x, y, ·)`.
pub(crate) fn horizontal_from_gradient(x: &[f64], y: &[f64], g: &[f64]) -> Vec<f64> {
    let n = x.len();
    let gz = g[2 * n];
    (0..n)
        .map(|i| g[i] - 0.5 * y[i] * gz)
        .chain((0..n).map(|i| g[n + i] + 0.5 * x[i] * gz))
        .collect()
}
