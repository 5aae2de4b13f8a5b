use super::polynomial::HPolynomial;

/// Flat evaluation form of an [`HPolynomial`] for hot loops: each term keeps
/// only its nonzero exponents.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    coeffs: Vec<f64>,
    offsets: Vec<usize>,
    factors: Vec<(u16, i32)>,
}

impl CompiledPoly {
    pub fn new(p: &HPolynomial) -> Self {
        let mut coeffs = Vec::with_capacity(p.len());
        let mut offsets = vec![0];
        let mut factors = Vec::new();
        for (e, c) in p.terms() {
            coeffs.push(c);
            for (var, &k) in e.iter().enumerate() {
                if k > 0 {
                    factors.push((var as u16, k as i32));
                }
            }
            offsets.push(factors.len());
        }
        Self {
            coeffs,
            offsets,
            factors,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    #[inline]
    pub fn eval(&self, c: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (t, coeff) in self.coeffs.iter().enumerate() {
            let mut v = *coeff;
            for &(var, k) in &self.factors[self.offsets[t]..self.offsets[t + 1]] {
                v *= if k == 1 { c[var as usize] } else { c[var as usize].powi(k) };
            }
            acc += v;
        }
        acc
    }
}
