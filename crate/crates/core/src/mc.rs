//! Monte Carlo estimators of `Q_t f(p) = E[f(p ⋆ x_t)]` and the conditional
//! structure around it: coupled mirror checks, tower-property probes,
//! martingale tests and the stochastic-integral representation of
//! `f(x_T) − Q_T f(0)`.
//!
//! Conditional expectations are never regressed. Each statement is tested
//! through unconditional orthogonality relations `E[(M_t − M_s) θ_s] = 0`
//! against a fixed probe set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::group::{apply_field, mirror, star, FieldId, FieldKind, GroupPoint, Mirrored, SmoothFunction};
use crate::poly::{self, CompiledPoly, HPolynomial, SemigroupSeries};
use crate::report::{CheckRecord, Num};
use crate::sim::{mirror_paths, simulate, walk_path, PathBundle, SimConfig};
use crate::stats::{mean, MCEstimate, ABS_FLOOR, DISCRETIZATION_C, K_SIGMA};

/// Relative tolerance for the per-sample coupled mirror comparison.
pub const COUPLED_TOL: f64 = 1e-10;

/// Probe functionals of the path up to time `s`, evaluated on the drivers
/// `(b_s, w_s)`. Indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Probe {
    One,
    B(usize),
    W(usize),
    BW(usize),
}

impl Probe {
    /// `1, b^1, w^1, b^1 w^1`.
    pub fn standard() -> Vec<Probe> {
        vec![Probe::One, Probe::B(1), Probe::W(1), Probe::BW(1)]
    }

    /// `coords` are the stacked coordinates of `x_s = (b, w, ½z)`.
    #[inline]
    pub fn eval(&self, coords: &[f64]) -> f64 {
        let n = (coords.len() - 1) / 2;
        match *self {
            Probe::One => 1.0,
            Probe::B(i) => coords[i - 1],
            Probe::W(i) => coords[n + i - 1],
            Probe::BW(i) => coords[i - 1] * coords[n + i - 1],
        }
    }

    pub fn label(&self) -> String {
        match self {
            Probe::One => "1".into(),
            Probe::B(i) => format!("b{i}"),
            Probe::W(i) => format!("w{i}"),
            Probe::BW(i) => format!("b{i}w{i}"),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Probe::One => Ok(()),
            Probe::B(i) | Probe::W(i) | Probe::BW(i) if (1..=n).contains(&i) => Ok(()),
            _ => usage(format!("probe {} outside 1..={n}", self.label())),
        }
    }
}

/// A statistical check `E[·] = 0` (or `≥ 0` for monotonicity checks).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCheck {
    pub label: String,
    pub estimate: MCEstimate,
    pub passed: bool,
}

impl ZeroCheck {
    fn equal(label: String, samples: &[f64], k: f64) -> Self {
        let estimate = MCEstimate::from_samples(samples);
        let passed = estimate.consistent_with(0.0, k);
        Self {
            label,
            estimate,
            passed,
        }
    }

    fn nonnegative(label: String, samples: &[f64], k: f64) -> Self {
        let estimate = MCEstimate::from_samples(samples);
        let passed = estimate.value() >= -k * estimate.stderr() - ABS_FLOOR;
        Self {
            label,
            estimate,
            passed,
        }
    }

    fn record(&self, prefix: &str) -> CheckRecord {
        CheckRecord::new(
            format!("{prefix}/{}", self.label),
            self.estimate.value(),
            0.0,
            Some(self.estimate.stderr()),
            self.passed,
        )
    }
}

fn check_dims(n_f: usize, paths: &PathBundle) -> Result<()> {
    if n_f != paths.n() {
        return usage(format!("function on H_{n_f} with paths on H_{}", paths.n()));
    }
    Ok(())
}

/// Values of `eval(path, coords)` at recorded index `rec`, in path order.
fn per_path<F>(paths: &PathBundle, rec: usize, mirrored: bool, eval: F) -> Vec<f64>
where
    F: Fn(usize, &[f64]) -> f64 + Sync,
{
    let d = 2 * paths.n() + 1;
    (0..paths.n_paths())
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |buf, j| {
                paths.fill_point(j, rec, mirrored, buf);
                eval(j, buf)
            },
        )
        .collect()
}

fn point(c: &[f64]) -> GroupPoint {
    GroupPoint::from_coords(c).expect("path coordinates are finite")
}

/// Sample mean of `f(p ⋆ x_t)` over the bundle.
pub fn q_estimate<F: SmoothFunction + ?Sized>(
    f: &F,
    p: &GroupPoint,
    t: f64,
    paths: &PathBundle,
) -> Result<MCEstimate> {
    check_dims(f.n(), paths)?;
    check_dims(p.n(), paths)?;
    let rec = paths.record_index_of_time(t)?;
    let samples = per_path(paths, rec, false, |_, c| {
        f.value(&star(p, &point(c)).expect("same n"))
    });
    Ok(MCEstimate::from_samples(&samples))
}

/// Exact value of `Q_t P(p)` from the polynomial engine, for comparison with
/// [`q_estimate`].
pub fn q_exact(p_poly: &HPolynomial, p: &GroupPoint, t: f64) -> Result<f64> {
    poly::heat_semigroup(p_poly, t)?.eval(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledMirrorReport {
    pub function: String,
    pub t: Num,
    /// `Q_t f(Ap)` on the original paths.
    pub at_mirror_point: MCEstimate,
    /// `Q_t(f∘A)(p)` on the mirrored paths (same random numbers).
    pub of_mirrored_function: MCEstimate,
    /// `Q_t(f∘A)(p)` on the original paths, equal only in law.
    pub uncoupled: MCEstimate,
    /// Largest `|a_j − b_j| / max(1, |a_j|)` over per-path summands.
    pub max_gap: Num,
    pub passed: bool,
}

impl CoupledMirrorReport {
    pub fn record(&self) -> CheckRecord {
        CheckRecord::new(
            format!("coupled_mirror/{}", self.function),
            self.at_mirror_point.value(),
            self.of_mirrored_function.value(),
            None,
            self.passed,
        )
        .with_note(format!("max summand gap {}", self.max_gap))
    }
}

/// Mirror-commutation check with common random numbers: per path,
/// `f(Ap ⋆ x_t)` against `(f∘A)(p ⋆ y_t)`.
pub fn coupled_mirror_check<F: SmoothFunction + ?Sized>(
    f: &F,
    p: &GroupPoint,
    t: f64,
    paths: &PathBundle,
) -> Result<CoupledMirrorReport> {
    let mirrored = mirror_paths(paths)?;
    coupled_mirror_check_with(f, p, t, paths, &mirrored)
}

/// As [`coupled_mirror_check`] with a precomputed `mirror_paths(paths)`.
pub fn coupled_mirror_check_with<F: SmoothFunction + ?Sized>(
    f: &F,
    p: &GroupPoint,
    t: f64,
    paths: &PathBundle,
    mirrored: &PathBundle,
) -> Result<CoupledMirrorReport> {
    check_dims(f.n(), paths)?;
    check_dims(p.n(), paths)?;
    if mirrored.config() != paths.config() || mirrored.is_mirrored() == paths.is_mirrored() {
        return usage("second bundle is not the mirror of the first");
    }
    let rec = paths.record_index_of_time(t)?;
    let ap = mirror(p);
    let fa = Mirrored(f);
    let a = per_path(paths, rec, false, |_, c| f.value(&star(&ap, &point(c)).unwrap()));
    let b = per_path(mirrored, rec, false, |_, c| fa.value(&star(p, &point(c)).unwrap()));
    let u = per_path(paths, rec, false, |_, c| fa.value(&star(p, &point(c)).unwrap()));
    let max_gap = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max);
    Ok(CoupledMirrorReport {
        function: f.name(),
        t: Num(t),
        at_mirror_point: MCEstimate::from_samples(&a),
        of_mirrored_function: MCEstimate::from_samples(&b),
        uncoupled: MCEstimate::from_samples(&u),
        max_gap: Num(max_gap),
        passed: max_gap <= COUPLED_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerReport {
    pub function: String,
    pub t: Num,
    pub horizon: Num,
    pub checks: Vec<ZeroCheck>,
}

impl TowerReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn records(&self) -> Vec<CheckRecord> {
        let prefix = format!("tower/{}/t={}/T={}", self.function, self.t.0, self.horizon.0);
        self.checks.iter().map(|c| c.record(&prefix)).collect()
    }
}

/// Estimates `E[(f(y_T) − Q_{T−t} f(y_t)) θ_t]` for each probe; every one
/// must vanish within `k_sigma` standard errors.
pub fn tower_test(
    f: &HPolynomial,
    t: f64,
    big_t: f64,
    probes: &[Probe],
    paths: &PathBundle,
    k_sigma: f64,
) -> Result<TowerReport> {
    check_dims(f.n(), paths)?;
    if t > big_t {
        return usage(format!("tower test needs t <= T, got t={t}, T={big_t}"));
    }
    for pr in probes {
        pr.validate(paths.n())?;
    }
    let rec_t = paths.record_index_of_time(t)?;
    let rec_big = paths.record_index_of_time(big_t)?;
    let series = SemigroupSeries::new(f)?;
    let fc = CompiledPoly::new(f);
    let terminal = per_path(paths, rec_big, true, |_, c| fc.eval(c));
    let early = per_path(paths, rec_t, true, |_, c| series.eval(big_t - t, c));
    let early_x = paths.points(rec_t, false);
    let checks = probes
        .iter()
        .map(|pr| {
            let samples: Vec<f64> = (0..paths.n_paths())
                .map(|j| (terminal[j] - early[j]) * pr.eval(&early_x[j]))
                .collect();
            ZeroCheck::equal(pr.label(), &samples, k_sigma)
        })
        .collect();
    Ok(TowerReport {
        function: crate::poly::PolyFunction::new(f.clone()).name(),
        t: Num(t),
        horizon: Num(big_t),
        checks,
    })
}

/// Test function for [`martingale_test`].
#[derive(Clone, Copy)]
pub enum TestFn<'a> {
    Poly(&'a HPolynomial),
    Smooth(&'a dyn SmoothFunction),
}

/// Settings of the nested Monte Carlo route for non-polynomial functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NestedOptions {
    pub inner_samples: usize,
    pub seed: u64,
}

impl NestedOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            inner_samples: 1024,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub function: String,
    pub field: String,
    pub times: Vec<Num>,
    /// `E[M_t]` per time.
    pub means: Vec<MCEstimate>,
    /// `E[M_t − M_{t_0}] = 0`.
    pub constant_mean: Vec<ZeroCheck>,
    /// `E[(M_t − M_s) θ_s] = 0` for adjacent times.
    pub orthogonality: Vec<ZeroCheck>,
    /// `E[M_t² − M_s²] ≥ 0` for adjacent times.
    pub second_moment: Vec<ZeroCheck>,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.constant_mean
            .iter()
            .chain(&self.orthogonality)
            .chain(&self.second_moment)
            .all(|c| c.passed)
    }

    pub fn records(&self) -> Vec<CheckRecord> {
        let prefix = format!("martingale/{}/{}", self.function, self.field);
        self.constant_mean
            .iter()
            .map(|c| c.record(&format!("{prefix}/mean")))
            .chain(self.orthogonality.iter().map(|c| c.record(&format!("{prefix}/orth"))))
            .chain(self.second_moment.iter().map(|c| c.record(&format!("{prefix}/m2"))))
            .collect()
    }
}

/// Checks whether `M_t = (field Q_{T−t} f)(x_t)` behaves as a martingale.
///
/// Polynomial `f` is handled exactly. Any other function needs `nested`,
/// which averages `(field f)(x_t ⋆ q) + c(q)·(Z f)(x_t ⋆ q)` over an
/// independent bundle of `q ~ x_{T−t}`; the correction `c(q)` is `q_{y_i}`
/// for `X_i`, `−q_{x_i}` for `Y_i` and zero for right-invariant fields,
/// which commute with translation on the right.
pub fn martingale_test(
    f: TestFn<'_>,
    field: FieldId,
    times: &[f64],
    probes: &[Probe],
    paths: &PathBundle,
    k_sigma: f64,
    nested: Option<NestedOptions>,
) -> Result<MartingaleReport> {
    field.validate(paths.n())?;
    for pr in probes {
        pr.validate(paths.n())?;
    }
    if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) {
        return usage("martingale times must be nonempty and increasing");
    }
    let horizon = paths.horizon();
    let recs: Vec<usize> = times
        .iter()
        .map(|&t| paths.record_index_of_time(t))
        .collect::<Result<_>>()?;
    let (name, values): (String, Vec<Vec<f64>>) = match (f, nested) {
        (TestFn::Poly(p), _) => {
            check_dims(p.n(), paths)?;
            let series = SemigroupSeries::new(p)?.map(|q| poly::poly_apply_field(field, q))?;
            let vals = times
                .iter()
                .zip(&recs)
                .map(|(&t, &rec)| per_path(paths, rec, false, |_, c| series.eval(horizon - t, c)))
                .collect();
            (crate::poly::PolyFunction::new(p.clone()).name(), vals)
        }
        (TestFn::Smooth(g), Some(opts)) => {
            check_dims(g.n(), paths)?;
            (g.name(), nested_values(g, field, times, &recs, paths, opts)?)
        }
        (TestFn::Smooth(g), None) => {
            return Err(Error::Capability(format!(
                "{} is not a polynomial; enable the nested Monte Carlo route",
                g.name()
            )))
        }
    };
    let n_paths = paths.n_paths();
    let means = values.iter().map(|v| MCEstimate::from_samples(v)).collect();
    let constant_mean = (1..times.len())
        .map(|j| {
            let d: Vec<f64> = (0..n_paths).map(|p| values[j][p] - values[0][p]).collect();
            ZeroCheck::equal(format!("t={}", times[j]), &d, k_sigma)
        })
        .collect();
    let mut orthogonality = Vec::new();
    let mut second_moment = Vec::new();
    for j in 1..times.len() {
        let early = paths.points(recs[j - 1], false);
        for pr in probes {
            let s: Vec<f64> = (0..n_paths)
                .map(|p| (values[j][p] - values[j - 1][p]) * pr.eval(&early[p]))
                .collect();
            orthogonality.push(ZeroCheck::equal(
                format!("s={},t={},probe={}", times[j - 1], times[j], pr.label()),
                &s,
                k_sigma,
            ));
        }
        let s: Vec<f64> = (0..n_paths)
            .map(|p| values[j][p].powi(2) - values[j - 1][p].powi(2))
            .collect();
        second_moment.push(ZeroCheck::nonnegative(
            format!("s={},t={}", times[j - 1], times[j]),
            &s,
            k_sigma,
        ));
    }
    Ok(MartingaleReport {
        function: name,
        field: field.to_string(),
        times: times.iter().map(|&t| Num(t)).collect(),
        means,
        constant_mean,
        orthogonality,
        second_moment,
    })
}

fn nested_values(
    g: &dyn SmoothFunction,
    field: FieldId,
    times: &[f64],
    recs: &[usize],
    paths: &PathBundle,
    opts: NestedOptions,
) -> Result<Vec<Vec<f64>>> {
    let n = paths.n();
    if !g.capabilities().gradient {
        return Err(Error::Capability(format!("{} provides no gradient", g.name())));
    }
    let correction = move |q: &GroupPoint| -> f64 {
        match field.kind {
            FieldKind::X => q.y[field.index - 1],
            FieldKind::Y => -q.x[field.index - 1],
            _ => 0.0,
        }
    };
    let outer = paths.config();
    let inner_cfg = SimConfig {
        n_paths: opts.inner_samples,
        seed: crate::sim::SeedPolicy::new(opts.seed),
        ..outer.clone()
    };
    let inner = simulate(&inner_cfg)?;
    let mut out = Vec::with_capacity(times.len());
    for (&t, &rec) in times.iter().zip(recs) {
        let inner_rec = inner.record_index_of_time(paths.horizon() - t)?;
        let inner_pts: Vec<GroupPoint> = inner.points(inner_rec, false).iter().map(|c| point(c)).collect();
        let vals = per_path(paths, rec, false, |_, c| {
            let x = point(c);
            let terms: Vec<f64> = inner_pts
                .iter()
                .map(|q| {
                    let p = star(&x, q).expect("same n");
                    let c = correction(q);
                    let zf = if c == 0.0 { 0.0 } else { apply_field(FieldId::z(), g, &p).unwrap_or(f64::NAN) };
                    apply_field(field, g, &p).unwrap_or(f64::NAN) + c * zf
                })
                .collect();
            mean(&terms)
        });
        if vals.iter().any(|v| v.is_nan()) {
            return usage(format!("nested evaluation of {} on H_{n} failed", g.name()));
        }
        out.push(vals);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub function: String,
    pub steps: usize,
    pub n_paths: usize,
    /// Root mean square of the per-path residual.
    pub rms: Num,
    pub residual: MCEstimate,
    /// `|E R| ≤ k·stderr + C·Δt`: the residual inherits the weak bias of `f(x_T)`.
    pub mean_ok: bool,
}

/// Per path,
/// `R = f(x_T) − Q_T f(0) − Σ_k Σ_i [X_i Q_{T−t_k} f(x_{t_k}) Δb^i_k + Y_i Q_{T−t_k} f(x_{t_k}) Δw^i_k]`,
/// the discretization error of the Itô representation of `f(x_T)`.
pub fn representation_check(f: &HPolynomial, config: &SimConfig, k_sigma: f64) -> Result<RepresentationReport> {
    config.validate()?;
    if f.n() != config.n {
        return usage(format!("function on H_{} with paths on H_{}", f.n(), config.n));
    }
    let n = config.n;
    let base = SemigroupSeries::new(f)?;
    let integrands: Vec<SemigroupSeries> = FieldId::horizontal(n)
        .into_iter()
        .map(|fld| base.map(|q| poly::poly_apply_field(fld, q)))
        .collect::<Result<_>>()?;
    let horizon = config.horizon;
    let q0 = base.eval(horizon, &vec![0.0; 2 * n + 1]);
    let fc = CompiledPoly::new(f);
    let residuals: Vec<f64> = (0..config.n_paths)
        .into_par_iter()
        .map(|j| {
            let mut x = vec![0.0; 2 * n + 1];
            let mut sum = 0.0;
            let mut r = 0.0;
            walk_path(config, j, false, |ev| {
                ev.fill_point(false, &mut x);
                if ev.is_last() {
                    r = fc.eval(&x) - q0 - sum;
                    return;
                }
                let s = horizon - ev.time;
                for i in 0..n {
                    sum += integrands[i].eval(s, &x) * ev.db[i];
                    sum += integrands[n + i].eval(s, &x) * ev.dw[i];
                }
            });
            r
        })
        .collect();
    let sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    let residual = MCEstimate::from_samples(&residuals);
    Ok(RepresentationReport {
        function: crate::poly::PolyFunction::new(f.clone()).name(),
        steps: config.steps,
        n_paths: config.n_paths,
        rms: Num(mean(&sq).sqrt()),
        mean_ok: residual.value().abs() <= k_sigma * residual.stderr() + DISCRETIZATION_C * config.dt() + ABS_FLOOR,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub coarse: RepresentationReport,
    pub fine: RepresentationReport,
    pub ratio: Num,
    pub threshold: Num,
    pub passed: bool,
}

/// Required RMS reduction per doubling of the step count.
pub const REPRESENTATION_RATIO: f64 = 1.5;

pub fn representation_refinement(f: &HPolynomial, config: &SimConfig, k_sigma: f64) -> Result<Refinement> {
    let coarse = representation_check(f, config, k_sigma)?;
    let fine = representation_check(f, &config.with_steps(2 * config.steps), k_sigma)?;
    let ratio = if fine.rms.0 == 0.0 {
        f64::INFINITY
    } else {
        coarse.rms.0 / fine.rms.0
    };
    Ok(Refinement {
        passed: (coarse.rms.0 == 0.0 && fine.rms.0 == 0.0) || ratio >= REPRESENTATION_RATIO,
        coarse,
        fine,
        ratio: Num(ratio),
        threshold: Num(REPRESENTATION_RATIO),
    })
}

impl Refinement {
    pub fn records(&self) -> Vec<CheckRecord> {
        let name = format!("representation/{}", self.coarse.function);
        vec![
            CheckRecord::new(
                format!("{name}/rms_ratio/{}->{}", self.coarse.steps, self.fine.steps),
                self.ratio.0,
                self.threshold.0,
                None,
                self.passed,
            )
            .with_note(format!("rms {} -> {}", self.coarse.rms, self.fine.rms)),
            CheckRecord::new(
                format!("{name}/mean/{}", self.coarse.steps),
                self.coarse.residual.value(),
                0.0,
                Some(self.coarse.residual.stderr()),
                self.coarse.mean_ok,
            ),
            CheckRecord::new(
                format!("{name}/mean/{}", self.fine.steps),
                self.fine.residual.value(),
                0.0,
                Some(self.fine.residual.stderr()),
                self.fine.mean_ok,
            ),
        ]
    }
}

/// Default statistical multiplier re-exported for callers of this module.
pub const DEFAULT_K: f64 = K_SIGMA;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::registry::{self, Coord};
    use crate::poly::PolyFunction;

    fn bundle(n_paths: usize, steps: usize, seed: u64) -> PathBundle {
        simulate(&SimConfig::new(1, n_paths, steps, 1.0, seed).recording_every(steps / 4)).unwrap()
    }

    fn mono(e: &[u32]) -> HPolynomial {
        HPolynomial::monomial(1, e.to_vec(), 1.0)
    }

    #[test]
    fn q_estimate_examples() {
        let paths = bundle(20_000, 256, 1);
        let origin = GroupPoint::identity(1);
        let one = registry::constant(1, 1.0);
        let e = q_estimate(&one, &origin, 1.0, &paths).unwrap();
        assert_eq!((e.value(), e.stderr()), (1.0, 0.0));
        let x2 = PolyFunction::new(mono(&[2, 0, 0]));
        assert!(q_estimate(&x2, &origin, 1.0, &paths).unwrap().consistent_with(1.0, K_SIGMA));
        let z2 = PolyFunction::new(mono(&[0, 0, 2]));
        let e = q_estimate(&z2, &origin, 1.0, &paths).unwrap();
        assert!((e.value() - 0.25).abs() <= K_SIGMA * e.stderr() + 1.0 / 256.0);
        assert!(q_estimate(&z2, &origin, 0.3, &paths).is_err());
    }

    #[test]
    fn coupled_mirror_examples() {
        let paths = bundle(2_000, 64, 2);
        let p = GroupPoint::new(vec![0.7], vec![-0.4], 1.1).unwrap();
        let z2 = PolyFunction::new(mono(&[0, 0, 2]));
        let rep = coupled_mirror_check(&z2, &p, 1.0, &paths).unwrap();
        assert!(rep.passed && rep.max_gap.0 <= COUPLED_TOL);

        let origin = GroupPoint::identity(1);
        let x1 = registry::coordinate(1, Coord::X(1));
        let rep = coupled_mirror_check(&x1, &origin, 0.5, &paths).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.at_mirror_point.value(), -rep.uncoupled.value());
        assert_eq!(rep.of_mirrored_function.value(), -rep.uncoupled.value());

        let one = registry::constant(1, 1.0);
        assert_eq!(coupled_mirror_check(&one, &p, 1.0, &paths).unwrap().max_gap.0, 0.0);
    }

    #[test]
    fn tower_examples() {
        let paths = bundle(40_000, 256, 3);
        let rep = tower_test(&mono(&[0, 0, 2]), 0.5, 1.0, &[Probe::One], &paths, K_SIGMA).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let rep = tower_test(&mono(&[1, 0, 0]), 0.5, 1.0, &[Probe::B(1)], &paths, K_SIGMA).unwrap();
        assert!(rep.passed());
        let rep = tower_test(&HPolynomial::constant(1, 2.0), 0.25, 1.0, &Probe::standard(), &paths, K_SIGMA)
            .unwrap();
        assert!(rep.checks.iter().all(|c| c.estimate.value() == 0.0));
        assert!(tower_test(&mono(&[1, 0, 0]), 1.0, 0.5, &[Probe::One], &paths, K_SIGMA).is_err());
    }

    #[test]
    fn martingale_examples() {
        let paths = bundle(40_000, 256, 4);
        let times = [0.0, 0.25, 0.5, 0.75];
        let x1 = mono(&[1, 0, 0]);
        let rep = martingale_test(TestFn::Poly(&x1), FieldId::x(1), &times, &Probe::standard(), &paths, 3.0, None)
            .unwrap();
        assert!(rep.passed());
        assert!(rep.means.iter().all(|m| m.value() == 1.0 && m.stderr() == 0.0));

        // X_1 Q_{1-t} z² = (1-t) b/2 − w z: mean zero, but its drift −b dt
        // shows up against the probe b
        let z2 = mono(&[0, 0, 2]);
        let rep = martingale_test(TestFn::Poly(&z2), FieldId::x(1), &times, &Probe::standard(), &paths, 3.0, None)
            .unwrap();
        assert!(rep.constant_mean.iter().all(|c| c.passed));
        let failed: Vec<&str> = rep.orthogonality.iter().filter(|c| !c.passed).map(|c| c.label.as_str()).collect();
        assert_eq!(failed, ["s=0.25,t=0.5,probe=b1", "s=0.5,t=0.75,probe=b1"]);
        for (c, want) in rep.orthogonality.iter().filter(|c| !c.passed).zip([-0.0625, -0.125]) {
            assert!((c.estimate.value() - want).abs() < 4.0 * c.estimate.stderr());
        }

        let rep = martingale_test(TestFn::Poly(&z2), FieldId::xhat(1), &times, &Probe::standard(), &paths, 3.0, None)
            .unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.second_moment.iter().all(|c| c.passed));

        let bump = registry::by_name("gauss_bump", 1).unwrap();
        let err = martingale_test(TestFn::Smooth(&*bump), FieldId::x(1), &times, &[], &paths, 3.0, None);
        assert!(matches!(err, Err(Error::Capability(_))));
    }

    #[test]
    fn nested_route_agrees_with_exact_route() {
        let paths = bundle(300, 64, 5);
        let times = [0.0, 0.5];
        let p = &mono(&[1, 0, 1]) + &mono(&[0, 0, 2]);
        let pf = PolyFunction::new(p.clone());
        for field in [FieldId::x(1), FieldId::y(1), FieldId::yhat(1)] {
            let exact = martingale_test(TestFn::Poly(&p), field, &times, &[], &paths, 3.0, None).unwrap();
            let nested = martingale_test(
                TestFn::Smooth(&pf),
                field,
                &times,
                &[],
                &paths,
                3.0,
                Some(NestedOptions {
                    inner_samples: 4000,
                    seed: 77,
                }),
            )
            .unwrap();
            for (a, b) in exact.means.iter().zip(&nested.means) {
                assert!((a.value() - b.value()).abs() <= 0.05, "{field}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn representation_examples() {
        let cfg = SimConfig::new(1, 200, 64, 1.0, 6);
        let rep = representation_check(&mono(&[1, 0, 0]), &cfg, 3.0).unwrap();
        assert!(rep.rms.0 < 1e-13, "{}", rep.rms);
        let rep = representation_check(&mono(&[0, 0, 2]), &cfg.with_paths(4000), 3.0).unwrap();
        assert!(rep.mean_ok);
        assert!(rep.rms.0 > 0.0);
    }
}
