use super::compiled::CompiledPoly;
use super::ops::generator;
use super::polynomial::HPolynomial;
use crate::error::{usage, Result};

/// Weight limit for semigroup expansion unless configured otherwise.
pub const DEFAULT_MAX_WEIGHT: u32 = 12;

/// The finite expansion `Q_t P = Σ_k t^k L^k P / k!`, with the powers
/// `L^k P` computed once so that `Q_t P` can be evaluated at many times.
#[derive(Clone, Debug)]
pub struct SemigroupSeries {
    powers: Vec<HPolynomial>,
    compiled: Vec<CompiledPoly>,
}

impl SemigroupSeries {
    pub fn new(p: &HPolynomial) -> Result<Self> {
        Self::with_max_weight(p, DEFAULT_MAX_WEIGHT)
    }

    pub fn with_max_weight(p: &HPolynomial, max_weight: u32) -> Result<Self> {
        if p.weight() > max_weight {
            return usage(format!(
                "polynomial weight {} exceeds the supported maximum {max_weight}",
                p.weight()
            ));
        }
        let mut powers = vec![p.clone()];
        // Nilpotency: L^{⌊W/2⌋+1} P = 0.
        for _ in 0..p.weight() / 2 {
            let next = generator(powers.last().unwrap());
            if next.is_zero() {
                break;
            }
            powers.push(next);
        }
        let compiled = powers.iter().map(CompiledPoly::new).collect();
        Ok(Self { powers, compiled })
    }

    /// `L^k P` for `k = 0..`; trailing zero powers are omitted.
    pub fn powers(&self) -> &[HPolynomial] {
        &self.powers
    }

    pub fn n(&self) -> usize {
        self.powers[0].n()
    }

    pub fn at(&self, t: f64) -> Result<HPolynomial> {
        if !(t >= 0.0) {
            return usage(format!("semigroup time must be nonnegative, got {t}"));
        }
        let mut acc = HPolynomial::zero(self.n());
        let mut factor = 1.0;
        for (k, p) in self.powers.iter().enumerate() {
            if k > 0 {
                factor *= t / k as f64;
            }
            acc = &acc + &p.scale(factor);
        }
        Ok(acc.pruned())
    }

    /// `(Q_t P)(c)` at stacked coordinates `c` without building `Q_t P`.
    #[inline]
    pub fn eval(&self, t: f64, c: &[f64]) -> f64 {
        let mut factor = 1.0;
        let mut acc = 0.0;
        for (k, p) in self.compiled.iter().enumerate() {
            if k > 0 {
                factor *= t / k as f64;
            }
            acc += factor * p.eval(c);
        }
        acc
    }

    /// Applies a linear operator to every power, e.g. a vector field, giving
    /// the series of `D Q_t P = Σ t^k D L^k P / k!`.
    pub fn map(&self, mut op: impl FnMut(&HPolynomial) -> Result<HPolynomial>) -> Result<Self> {
        let powers: Vec<HPolynomial> = self.powers.iter().map(&mut op).collect::<Result<_>>()?;
        let compiled = powers.iter().map(CompiledPoly::new).collect();
        Ok(Self { powers, compiled })
    }
}

/// `e^{tL} P`, exact.
pub fn heat_semigroup(p: &HPolynomial, t: f64) -> Result<HPolynomial> {
    heat_semigroup_with_max_weight(p, t, DEFAULT_MAX_WEIGHT)
}

pub fn heat_semigroup_with_max_weight(p: &HPolynomial, t: f64, max_weight: u32) -> Result<HPolynomial> {
    if !(t >= 0.0) {
        return usage(format!("semigroup time must be nonnegative, got {t}"));
    }
    SemigroupSeries::with_max_weight(p, max_weight)?.at(t)
}
