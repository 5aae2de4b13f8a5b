//! Discretized paths of the driving Brownian motions `(b, w)` and their Lévy
//! area `z_t = Σ_i ∫ (b^i dw^i − w^i db^i)`.
//!
//! The Lévy area follows the left-point (Itô) recursion
//! `z_{k+1} = z_k + Σ_i (b^i_k Δw^i_k − w^i_k Δb^i_k)`. Since `b^i` and `w^i`
//! are independent their bracket vanishes, so the Itô and Stratonovich areas
//! coincide and the same recursion serves both readings of the SDE.
//!
//! Path `j` draws its increments from ChaCha8 stream `j` of the master seed,
//! so a path depends only on `(seed, j, step)` and never on scheduling.

mod io;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::group::GroupPoint;

pub use io::{read_binary, write_binary, write_terminal_csv};

/// Refuse to materialize bundles larger than this many bytes.
pub const MAX_BUNDLE_BYTES: usize = 2 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamRule {
    /// `ChaCha8Rng::seed_from_u64(master)` with `set_stream(path_index)`.
    ChaCha8PerPath,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master: u64,
    pub rule: StreamRule,
}

impl SeedPolicy {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            rule: StreamRule::ChaCha8PerPath,
        }
    }

    pub fn path_rng(&self, path: usize) -> ChaCha8Rng {
        match self.rule {
            StreamRule::ChaCha8PerPath => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.master);
                rng.set_stream(path as u64);
                rng
            }
        }
    }
}

/// Simulation parameters. Only every `record_every`-th grid point (and the
/// terminal one) is stored in a [`PathBundle`]; streaming consumers see every
/// step through [`walk_path`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub n_paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub seed: SeedPolicy,
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(n: usize, n_paths: usize, steps: usize, horizon: f64, seed: u64) -> Self {
        Self {
            n,
            n_paths,
            steps,
            horizon,
            seed: SeedPolicy::new(seed),
            record_every: 1,
        }
    }

    pub fn recording_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        let mut c = self.clone();
        c.steps = steps;
        c.record_every = c.record_every.min(steps).max(1);
        c
    }

    pub fn with_paths(&self, n_paths: usize) -> Self {
        let mut c = self.clone();
        c.n_paths = n_paths;
        c
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = SeedPolicy::new(seed);
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return usage("n must be at least 1");
        }
        if self.n_paths == 0 {
            return usage("number of paths must be at least 1");
        }
        if self.steps == 0 {
            return usage("number of steps must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return usage(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.record_every == 0 {
            return usage("record_every must be at least 1");
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time_of(&self, step: usize) -> f64 {
        if step == self.steps {
            self.horizon
        } else {
            step as f64 * self.dt()
        }
    }

    /// Grid index of time `t`, if `t` lies on the grid.
    pub fn step_of_time(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt()).round();
        if !(k >= 0.0 && k <= self.steps as f64) || (k * self.dt() - t).abs() > 1e-9 * self.horizon {
            return usage(format!(
                "time {t} is not on the grid of {} steps over [0, {}]",
                self.steps, self.horizon
            ));
        }
        Ok(k as usize)
    }

    pub fn recorded_steps(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..=self.steps).step_by(self.record_every).collect();
        if *v.last().unwrap() != self.steps {
            v.push(self.steps);
        }
        v
    }

    fn state_len(&self) -> usize {
        2 * self.n + 1
    }
}

/// State of one path at grid step `step`, plus the increments that lead to
/// step `step + 1` (empty at the final step).
pub struct StepEvent<'a> {
    pub step: usize,
    pub time: f64,
    pub b: &'a [f64],
    pub w: &'a [f64],
    pub levy: f64,
    pub db: &'a [f64],
    pub dw: &'a [f64],
}

impl StepEvent<'_> {
    pub fn is_last(&self) -> bool {
        self.db.is_empty()
    }

    /// Stacked coordinates of `x_t = (b, w, ½z)`, or of `y_t = (−b, −w, ½z)`
    /// when `mirrored`.
    pub fn fill_point(&self, mirrored: bool, out: &mut [f64]) {
        let n = self.b.len();
        let s = if mirrored { -1.0 } else { 1.0 };
        for i in 0..n {
            out[i] = s * self.b[i];
            out[n + i] = s * self.w[i];
        }
        out[2 * n] = 0.5 * self.levy;
    }
}

/// Streams one path step by step. `negate` flips every increment, which
/// produces the mirrored drivers `(−b, −w)` from the same random numbers.
pub fn walk_path<F>(config: &SimConfig, path: usize, negate: bool, mut visit: F)
where
    F: FnMut(&StepEvent<'_>),
{
    let n = config.n;
    let sqrt_dt = config.dt().sqrt();
    let mut rng = config.seed.path_rng(path);
    let mut b = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut db = vec![0.0; n];
    let mut dw = vec![0.0; n];
    let mut levy = 0.0;
    for k in 0..config.steps {
        for v in db.iter_mut().chain(dw.iter_mut()) {
            let g: f64 = StandardNormal.sample(&mut rng);
            let inc = sqrt_dt * g;
            *v = if negate { -inc } else { inc };
        }
        visit(&StepEvent {
            step: k,
            time: config.time_of(k),
            b: &b,
            w: &w,
            levy,
            db: &db,
            dw: &dw,
        });
        let mut area = 0.0;
        for i in 0..n {
            area += b[i] * dw[i] - w[i] * db[i];
        }
        levy += area;
        for i in 0..n {
            b[i] += db[i];
            w[i] += dw[i];
        }
    }
    visit(&StepEvent {
        step: config.steps,
        time: config.horizon,
        b: &b,
        w: &w,
        levy,
        db: &[],
        dw: &[],
    });
}

/// Paths recorded on the grid points `config.recorded_steps()`.
///
/// Row layout per path and recorded time: `(b_1..b_n, w_1..w_n, z)` where
/// `z` is the raw Lévy area (the group coordinate is `z/2`).
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    config: SimConfig,
    mirrored: bool,
    record_steps: Vec<usize>,
    data: Vec<f64>,
}

impl PathBundle {
    pub fn config(&self) -> &SimConfig {
        &self.config
    }
    pub fn n(&self) -> usize {
        self.config.n
    }
    pub fn n_paths(&self) -> usize {
        self.config.n_paths
    }
    pub fn horizon(&self) -> f64 {
        self.config.horizon
    }
    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }
    pub fn record_steps(&self) -> &[usize] {
        &self.record_steps
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn row_len(&self) -> usize {
        self.record_steps.len() * self.config.state_len()
    }

    /// Position of grid step `step` among the recorded steps.
    pub fn record_index(&self, step: usize) -> Result<usize> {
        self.record_steps.binary_search(&step).or_else(|_| {
            usage(format!(
                "step {step} is not recorded (grid of {} steps, every {})",
                self.config.steps, self.config.record_every
            ))
        })
    }

    /// Recorded index of time `t`.
    pub fn record_index_of_time(&self, t: f64) -> Result<usize> {
        self.record_index(self.config.step_of_time(t)?)
    }

    /// Raw state `(b, w, z)` of `path` at recorded index `rec`.
    #[inline]
    pub fn state(&self, path: usize, rec: usize) -> &[f64] {
        let d = self.config.state_len();
        let start = path * self.row_len() + rec * d;
        &self.data[start..start + d]
    }

    /// Stacked group coordinates of `x_t` (or `y_t = A x_t` when `mirrored`).
    #[inline]
    pub fn fill_point(&self, path: usize, rec: usize, mirrored: bool, out: &mut [f64]) {
        let s = self.state(path, rec);
        let n = self.config.n;
        let sign = if mirrored { -1.0 } else { 1.0 };
        for k in 0..2 * n {
            out[k] = sign * s[k];
        }
        out[2 * n] = 0.5 * s[2 * n];
    }

    /// All group points at recorded index `rec`, one per path.
    pub fn points(&self, rec: usize, mirrored: bool) -> Vec<Vec<f64>> {
        let d = self.config.state_len();
        (0..self.n_paths())
            .map(|j| {
                let mut c = vec![0.0; d];
                self.fill_point(j, rec, mirrored, &mut c);
                c
            })
            .collect()
    }

    pub fn terminal_index(&self) -> usize {
        self.record_steps.len() - 1
    }
}

fn simulate_signed(config: &SimConfig, negate: bool) -> Result<PathBundle> {
    config.validate()?;
    let record_steps = config.recorded_steps();
    let d = config.state_len();
    let row = record_steps.len() * d;
    let total = row
        .checked_mul(config.n_paths)
        .filter(|t| t.saturating_mul(8) <= MAX_BUNDLE_BYTES)
        .ok_or_else(|| {
            crate::Error::Usage(format!(
                "bundle of {} paths x {} records too large; increase record_every",
                config.n_paths,
                record_steps.len()
            ))
        })?;
    let mut data = vec![0.0; total];
    let every = config.record_every;
    let steps = config.steps;
    let last_rec = record_steps.len() - 1;
    data.par_chunks_mut(row).enumerate().for_each(|(j, out)| {
        walk_path(config, j, negate, |ev| {
            let rec = if ev.step == steps {
                last_rec
            } else if ev.step % every == 0 {
                ev.step / every
            } else {
                return;
            };
            let slot = &mut out[rec * d..(rec + 1) * d];
            slot[..ev.b.len()].copy_from_slice(ev.b);
            slot[ev.b.len()..2 * ev.b.len()].copy_from_slice(ev.w);
            slot[2 * ev.b.len()] = ev.levy;
        });
    });
    Ok(PathBundle {
        config: config.clone(),
        mirrored: negate,
        record_steps,
        data,
    })
}

/// Simulates `config.n_paths` independent paths.
pub fn simulate(config: &SimConfig) -> Result<PathBundle> {
    simulate_signed(config, false)
}

/// The bundle driven by `(−b, −w)` with the Lévy area recomputed by the same
/// recursion. Since `z(−b, −w) = z(b, w)` the areas agree with the original.
pub fn mirror_paths(paths: &PathBundle) -> Result<PathBundle> {
    simulate_signed(&paths.config, !paths.mirrored)
}

/// `x_t = (b, w, ½z)` of one path, or `y_t = (−b, −w, ½z)` when `mirrored`.
pub fn point_at(paths: &PathBundle, path: usize, step: usize, mirrored: bool) -> Result<GroupPoint> {
    if path >= paths.n_paths() {
        return usage(format!("path {path} out of range 0..{}", paths.n_paths()));
    }
    if step > paths.config.steps {
        return usage(format!("step {step} out of range 0..={}", paths.config.steps));
    }
    let rec = paths.record_index(step)?;
    let mut c = vec![0.0; paths.config.state_len()];
    paths.fill_point(path, rec, mirrored, &mut c);
    GroupPoint::from_coords(&c)
}

/// Largest `|z(−b, −w) − z(b, w)|` over every path and every grid step,
/// computed by running both recursions side by side.
pub fn levy_mirror_gap(config: &SimConfig) -> Result<f64> {
    config.validate()?;
    let n = config.n;
    let gaps: Vec<f64> = (0..config.n_paths)
        .into_par_iter()
        .map(|j| {
            let mut mb = vec![0.0; n];
            let mut mw = vec![0.0; n];
            let mut mz = 0.0;
            let mut gap: f64 = 0.0;
            walk_path(config, j, false, |ev| {
                gap = gap.max((mz - ev.levy).abs());
                if ev.is_last() {
                    return;
                }
                let mut area = 0.0;
                for i in 0..n {
                    area += mb[i] * (-ev.dw[i]) - mw[i] * (-ev.db[i]);
                }
                mz += area;
                for i in 0..n {
                    mb[i] -= ev.db[i];
                    mw[i] -= ev.dw[i];
                }
            });
            gap
        })
        .collect();
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
