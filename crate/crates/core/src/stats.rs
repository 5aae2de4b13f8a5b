//! Sample statistics with order-fixed reductions.
//!
//! Every mean is computed by pairwise summation over samples stored in path
//! order, so results do not depend on how the samples were produced in
//! parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::Num;

/// Multiplier of the standard error in every statistical pass rule.
pub const K_SIGMA: f64 = 3.0;

/// Absolute slack added to statistical rules so that quantities which are
/// exactly zero with zero standard error still pass after rounding.
pub const ABS_FLOOR: f64 = 1e-12;

/// Constant `C` of the weak discretization allowance `C·Δt`.
pub const DISCRETIZATION_C: f64 = 1.0;

/// First stream index reserved for bootstrap replicates; path streams use
/// indices below it.
pub(crate) const BOOTSTRAP_STREAM_BASE: u64 = 1 << 62;

/// Point estimate with standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: Num,
    pub stderr: Num,
    pub n_samples: usize,
    /// Bootstrap percentile interval, when one was computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<(Num, Num)>,
}

impl MCEstimate {
    /// Sample mean and `sd / sqrt(N)` with the `N − 1` variance denominator.
    pub fn from_samples(xs: &[f64]) -> Self {
        let (m, v) = mean_var(xs);
        let n = xs.len();
        let se = if n > 1 { (v / n as f64).sqrt() } else { 0.0 };
        Self::new(m, se, n)
    }

    pub fn new(value: f64, stderr: f64, n_samples: usize) -> Self {
        Self {
            value: Num(value),
            stderr: Num(stderr),
            n_samples,
            interval: None,
        }
    }

    /// A quantity known exactly.
    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0, 0)
    }

    pub fn value(&self) -> f64 {
        self.value.0
    }

    pub fn stderr(&self) -> f64 {
        self.stderr.0
    }

    pub fn with_interval(mut self, lo: f64, hi: f64) -> Self {
        let v = self.value.0;
        self.interval = Some((Num(lo.min(v)), Num(hi.max(v))));
        self
    }

    /// `|value − target| ≤ k·stderr` (plus [`ABS_FLOOR`]).
    pub fn consistent_with(&self, target: f64, k: f64) -> bool {
        (self.value() - target).abs() <= k * self.stderr() + ABS_FLOOR
    }
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (m, pairwise_sum(&dev) / (n - 1) as f64)
}

/// Standard error of the difference of two independent estimates.
pub fn independent_stderr(a: &MCEstimate, b: &MCEstimate) -> f64 {
    a.stderr().hypot(b.stderr())
}

/// Settings for percentile bootstrap intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bootstrap {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl Bootstrap {
    pub fn new(seed: u64) -> Self {
        Self {
            replicates: 1000,
            level: 0.99,
            seed,
        }
    }

    /// Percentile interval of `stat` over resampled index sets. Replicate `r`
    /// draws its indices from its own counter-based stream.
    pub fn interval<F>(&self, n: usize, stat: F) -> (f64, f64)
    where
        F: Fn(&[usize]) -> f64 + Sync,
    {
        let mut reps: Vec<f64> = (0..self.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(BOOTSTRAP_STREAM_BASE + r as u64);
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                stat(&idx)
            })
            .collect();
        reps.sort_by(f64::total_cmp);
        let alpha = 1.0 - self.level;
        (quantile(&reps, alpha / 2.0), quantile(&reps, 1.0 - alpha / 2.0))
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_zero_stderr() {
        let est = MCEstimate::from_samples(&vec![1.0; 1000]);
        assert_eq!(est.value(), 1.0);
        assert_eq!(est.stderr(), 0.0);
        assert!(est.consistent_with(1.0, K_SIGMA));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..10_001).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 10_000.0 * 10_001.0 / 2.0);
    }

    #[test]
    fn stderr_formula() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let est = MCEstimate::from_samples(&xs);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((est.stderr() - sd / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_interval_covers_mean_and_is_reproducible() {
        let xs: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64).collect();
        let b = Bootstrap {
            replicates: 200,
            ..Bootstrap::new(3)
        };
        let stat = |idx: &[usize]| idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64;
        let (lo, hi) = b.interval(xs.len(), stat);
        let m = mean(&xs);
        assert!(lo < m && m < hi);
        assert_eq!(b.interval(xs.len(), stat), (lo, hi));
    }
}
