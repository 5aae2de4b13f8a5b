use super::compiled::CompiledPoly;
use super::polynomial::HPolynomial;
use crate::group::{Capabilities, GroupPoint, SmoothFunction, SymMatrix};

/// A polynomial viewed as a [`SmoothFunction`], with its gradient and Hessian
/// differentiated symbolically once at construction.
#[derive(Clone, Debug)]
pub struct PolyFunction {
    poly: HPolynomial,
    name: String,
    value: CompiledPoly,
    gradient: Vec<CompiledPoly>,
    hessian: Vec<CompiledPoly>,
}

impl PolyFunction {
    pub fn new(poly: HPolynomial) -> Self {
        let name = describe(&poly);
        Self::named(poly, name)
    }

    pub fn named(poly: HPolynomial, name: String) -> Self {
        let d = poly.dim();
        let first: Vec<HPolynomial> = (0..d).map(|k| poly.partial(k)).collect();
        let mut hessian = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in i..d {
                hessian.push(CompiledPoly::new(&first[i].partial(j)));
            }
        }
        Self {
            value: CompiledPoly::new(&poly),
            gradient: first.iter().map(CompiledPoly::new).collect(),
            hessian,
            poly,
            name,
        }
    }

    pub fn poly(&self) -> &HPolynomial {
        &self.poly
    }
}

fn describe(p: &HPolynomial) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let n = p.n();
    let mut parts = Vec::new();
    for (e, c) in p.terms() {
        let mut m = String::new();
        for (var, &k) in e.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let sym = if var < n {
                format!("x{}", var + 1)
            } else if var < 2 * n {
                format!("y{}", var - n + 1)
            } else {
                "z".to_string()
            };
            m.push_str(&sym);
            if k > 1 {
                m.push_str(&format!("^{k}"));
            }
        }
        parts.push(match (m.is_empty(), c == 1.0) {
            (true, _) => format!("{c}"),
            (false, true) => m,
            (false, false) => format!("{c}*{m}"),
        });
    }
    parts.join("+")
}

impl SmoothFunction for PolyFunction {
    fn n(&self) -> usize {
        self.poly.n()
    }
    fn name(&self) -> String {
        self.name.clone()
    }
    fn value(&self, p: &GroupPoint) -> f64 {
        self.value.eval(&p.coords())
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities::FULL
    }
    fn gradient(&self, p: &GroupPoint) -> Option<Vec<f64>> {
        let c = p.coords();
        Some(self.gradient.iter().map(|g| g.eval(&c)).collect())
    }
    fn hessian(&self, p: &GroupPoint) -> Option<SymMatrix> {
        let c = p.coords();
        let d = c.len();
        let mut h = SymMatrix::zeros(d);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                h.set(i, j, self.hessian[k].eval(&c));
                k += 1;
            }
        }
        Some(h)
    }
    fn bounded_derivatives(&self) -> bool {
        self.poly.weight() == 0
    }
}
