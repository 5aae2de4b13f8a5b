use std::sync::Arc;

use super::point::{mirror, star_unchecked, GroupPoint};

/// Dense symmetric matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    fn scaled(mut self, c: f64) -> Self {
        self.data.iter_mut().for_each(|v| *v *= c);
        self
    }
}

/// Which derivatives a function can supply analytically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub gradient: bool,
    pub hessian: bool,
}

impl Capabilities {
    pub const VALUE_ONLY: Self = Self {
        gradient: false,
        hessian: false,
    };
    pub const FULL: Self = Self {
        gradient: true,
        hessian: true,
    };
}

/// A test function on `H_n` with optional analytic derivatives.
///
/// Gradients and Hessians are taken with respect to the stacked coordinates
/// `(x_1..x_n, y_1..y_n, z)`.
pub trait SmoothFunction: Send + Sync {
    fn n(&self) -> usize;
    fn name(&self) -> String;
    fn value(&self, p: &GroupPoint) -> f64;
    fn capabilities(&self) -> Capabilities;

    fn gradient(&self, _p: &GroupPoint) -> Option<Vec<f64>> {
        None
    }

    fn hessian(&self, _p: &GroupPoint) -> Option<SymMatrix> {
        None
    }

    /// True when the function and its derivatives up to order two are bounded.
    fn bounded_derivatives(&self) -> bool {
        false
    }
}

impl<F: SmoothFunction + ?Sized> SmoothFunction for &F {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn value(&self, p: &GroupPoint) -> f64 {
        (**self).value(p)
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
    fn gradient(&self, p: &GroupPoint) -> Option<Vec<f64>> {
        (**self).gradient(p)
    }
    fn hessian(&self, p: &GroupPoint) -> Option<SymMatrix> {
        (**self).hessian(p)
    }
    fn bounded_derivatives(&self) -> bool {
        (**self).bounded_derivatives()
    }
}

macro_rules! forward_smart_pointer {
    ($ptr:ident) => {
        impl<F: SmoothFunction + ?Sized> SmoothFunction for $ptr<F> {
            fn n(&self) -> usize {
                (**self).n()
            }
            fn name(&self) -> String {
                (**self).name()
            }
            fn value(&self, p: &GroupPoint) -> f64 {
                (**self).value(p)
            }
            fn capabilities(&self) -> Capabilities {
                (**self).capabilities()
            }
            fn gradient(&self, p: &GroupPoint) -> Option<Vec<f64>> {
                (**self).gradient(p)
            }
            fn hessian(&self, p: &GroupPoint) -> Option<SymMatrix> {
                (**self).hessian(p)
            }
            fn bounded_derivatives(&self) -> bool {
                (**self).bounded_derivatives()
            }
        }
    };
}

forward_smart_pointer!(Box);
forward_smart_pointer!(Arc);

/// Constant Jacobian of an affine change of variables `q ↦ Φ(q)`.
#[derive(Clone, Debug)]
struct Jacobian {
    dim: usize,
    data: Vec<f64>,
}

impl Jacobian {
    fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.dim + col] = v;
    }

    /// `Jᵀ g`.
    fn pull_gradient(&self, g: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|col| (0..d).map(|row| self.data[row * d + col] * g[row]).sum())
            .collect()
    }

    /// `Jᵀ H J`.
    fn pull_hessian(&self, h: &SymMatrix) -> SymMatrix {
        let d = self.dim;
        let mut hj = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                hj[i * d + j] = (0..d).map(|k| h.get(i, k) * self.data[k * d + j]).sum();
            }
        }
        let mut out = SymMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let v = (0..d).map(|k| self.data[k * d + i] * hj[k * d + j]).sum();
                out.set(i, j, v);
            }
        }
        out
    }
}

/// `f ∘ A`.
#[derive(Clone, Debug)]
pub struct Mirrored<F>(pub F);

impl<F: SmoothFunction> SmoothFunction for Mirrored<F> {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn name(&self) -> String {
        format!("{}∘A", self.0.name())
    }
    fn value(&self, p: &GroupPoint) -> f64 {
        self.0.value(&mirror(p))
    }
    fn capabilities(&self) -> Capabilities {
        self.0.capabilities()
    }
    fn gradient(&self, p: &GroupPoint) -> Option<Vec<f64>> {
        let n = self.n();
        let mut g = self.0.gradient(&mirror(p))?;
        g[..2 * n].iter_mut().for_each(|v| *v = -*v);
        Some(g)
    }
    fn hessian(&self, p: &GroupPoint) -> Option<SymMatrix> {
        let n = self.n();
        let mut h = self.0.hessian(&mirror(p))?;
        // Mixed horizontal/vertical entries flip sign; the rest are even.
        for i in 0..2 * n {
            let v = h.get(i, 2 * n);
            h.set(i, 2 * n, -v);
        }
        Some(h)
    }
    fn bounded_derivatives(&self) -> bool {
        self.0.bounded_derivatives()
    }
}

/// `q ↦ f(p ⋆ q)`.
#[derive(Clone, Debug)]
pub struct LeftTranslated<F> {
    inner: F,
    by: GroupPoint,
    jac: Jacobian,
}

impl<F: SmoothFunction> LeftTranslated<F> {
    pub fn new(inner: F, by: GroupPoint) -> Self {
        let n = by.n();
        let mut jac = Jacobian::identity(2 * n + 1);
        for i in 0..n {
            jac.set(2 * n, i, -0.5 * by.y[i]);
            jac.set(2 * n, n + i, 0.5 * by.x[i]);
        }
        Self { inner, by, jac }
    }
}

impl<F: SmoothFunction> SmoothFunction for LeftTranslated<F> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn name(&self) -> String {
        format!("{}∘L_p", self.inner.name())
    }
    fn value(&self, q: &GroupPoint) -> f64 {
        self.inner.value(&star_unchecked(&self.by, q))
    }
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
    fn gradient(&self, q: &GroupPoint) -> Option<Vec<f64>> {
        let g = self.inner.gradient(&star_unchecked(&self.by, q))?;
        Some(self.jac.pull_gradient(&g))
    }
    fn hessian(&self, q: &GroupPoint) -> Option<SymMatrix> {
        let h = self.inner.hessian(&star_unchecked(&self.by, q))?;
        Some(self.jac.pull_hessian(&h))
    }
    fn bounded_derivatives(&self) -> bool {
        self.inner.bounded_derivatives()
    }
}

/// `q ↦ f(q ⋆ p)`.
#[derive(Clone, Debug)]
pub struct RightTranslated<F> {
    inner: F,
    by: GroupPoint,
    jac: Jacobian,
}

impl<F: SmoothFunction> RightTranslated<F> {
    pub fn new(inner: F, by: GroupPoint) -> Self {
        let n = by.n();
        let mut jac = Jacobian::identity(2 * n + 1);
        for i in 0..n {
            jac.set(2 * n, i, 0.5 * by.y[i]);
            jac.set(2 * n, n + i, -0.5 * by.x[i]);
        }
        Self { inner, by, jac }
    }
}

impl<F: SmoothFunction> SmoothFunction for RightTranslated<F> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn name(&self) -> String {
        format!("{}∘R_p", self.inner.name())
    }
    fn value(&self, q: &GroupPoint) -> f64 {
        self.inner.value(&star_unchecked(q, &self.by))
    }
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
    fn gradient(&self, q: &GroupPoint) -> Option<Vec<f64>> {
        let g = self.inner.gradient(&star_unchecked(q, &self.by))?;
        Some(self.jac.pull_gradient(&g))
    }
    fn hessian(&self, q: &GroupPoint) -> Option<SymMatrix> {
        let h = self.inner.hessian(&star_unchecked(q, &self.by))?;
        Some(self.jac.pull_hessian(&h))
    }
    fn bounded_derivatives(&self) -> bool {
        self.inner.bounded_derivatives()
    }
}

/// `c · f`.
#[derive(Clone, Debug)]
pub struct Scaled<F> {
    pub inner: F,
    pub factor: f64,
}

impl<F: SmoothFunction> SmoothFunction for Scaled<F> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn name(&self) -> String {
        format!("{}*{}", self.factor, self.inner.name())
    }
    fn value(&self, p: &GroupPoint) -> f64 {
        self.factor * self.inner.value(p)
    }
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
    fn gradient(&self, p: &GroupPoint) -> Option<Vec<f64>> {
        let mut g = self.inner.gradient(p)?;
        g.iter_mut().for_each(|v| *v *= self.factor);
        Some(g)
    }
    fn hessian(&self, p: &GroupPoint) -> Option<SymMatrix> {
        Some(self.inner.hessian(p)?.scaled(self.factor))
    }
    fn bounded_derivatives(&self) -> bool {
        self.inner.bounded_derivatives()
    }
}

/// Fills in missing derivatives by central differences.
///
/// First derivatives use the step `h = ε^{1/3}·max(1, |coordinate|)`. Second
/// derivatives difference the analytic gradient when there is one, and fall
/// back to second differences of values with `h = ε^{1/4}·max(1, |coordinate|)`.
#[derive(Clone, Debug)]
pub struct FiniteDiff<F>(pub F);

fn fd_step(c: f64, power: f64) -> f64 {
    f64::EPSILON.powf(power) * c.abs().max(1.0)
}

fn shifted(coords: &[f64], k: usize, h: f64) -> GroupPoint {
    let mut c = coords.to_vec();
    c[k] += h;
    GroupPoint::from_coords(&c).expect("shifted point keeps the layout")
}

pub(crate) fn central_gradient<F: SmoothFunction + ?Sized>(f: &F, p: &GroupPoint) -> Vec<f64> {
    let c = p.coords();
    (0..c.len())
        .map(|k| {
            let h = fd_step(c[k], 1.0 / 3.0);
            (f.value(&shifted(&c, k, h)) - f.value(&shifted(&c, k, -h))) / (2.0 * h)
        })
        .collect()
}

impl<F: SmoothFunction> SmoothFunction for FiniteDiff<F> {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn name(&self) -> String {
        self.0.name()
    }
    fn value(&self, p: &GroupPoint) -> f64 {
        self.0.value(p)
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities::FULL
    }
    fn gradient(&self, p: &GroupPoint) -> Option<Vec<f64>> {
        self.0.gradient(p).or_else(|| Some(central_gradient(&self.0, p)))
    }
    fn hessian(&self, p: &GroupPoint) -> Option<SymMatrix> {
        if let Some(h) = self.0.hessian(p) {
            return Some(h);
        }
        let c = p.coords();
        let d = c.len();
        let mut out = SymMatrix::zeros(d);
        if self.0.capabilities().gradient {
            let cols: Vec<Vec<f64>> = (0..d)
                .map(|k| {
                    let h = fd_step(c[k], 1.0 / 3.0);
                    let gp = self.0.gradient(&shifted(&c, k, h))?;
                    let gm = self.0.gradient(&shifted(&c, k, -h))?;
                    Some(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
                })
                .collect::<Option<_>>()?;
            for i in 0..d {
                for j in i..d {
                    out.set(i, j, 0.5 * (cols[i][j] + cols[j][i]));
                }
            }
        } else {
            let f0 = self.0.value(p);
            for i in 0..d {
                let hi = fd_step(c[i], 0.25);
                for j in i..d {
                    let v = if i == j {
                        let fp = self.0.value(&shifted(&c, i, hi));
                        let fm = self.0.value(&shifted(&c, i, -hi));
                        (fp - 2.0 * f0 + fm) / (hi * hi)
                    } else {
                        let hj = fd_step(c[j], 0.25);
                        let eval = |si: f64, sj: f64| {
                            let mut cc = c.clone();
                            cc[i] += si * hi;
                            cc[j] += sj * hj;
                            self.0.value(&GroupPoint::from_coords(&cc).unwrap())
                        };
                        (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                            / (4.0 * hi * hj)
                    };
                    out.set(i, j, v);
                }
            }
        }
        Some(out)
    }
    fn bounded_derivatives(&self) -> bool {
        self.0.bounded_derivatives()
    }
}
