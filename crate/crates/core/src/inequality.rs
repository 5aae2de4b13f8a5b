//! Both sides of the Poincaré and log-Sobolev inequalities at the horizon of
//! a path bundle, the equality cases, and the exponential-martingale
//! (Girsanov) mechanics behind the log-Sobolev bound.
//!
//! Verdicts use the standard error of the per-sample slack, so the common
//! random numbers shared by both sides cancel in the tolerance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::group::{horizontal_gradient, FieldId, GroupPoint, SmoothFunction};
use crate::group::registry::{self, Coord, ExpLinear};
use crate::poly::{self, CompiledPoly, HPolynomial, PolyFunction, SemigroupSeries};
use crate::report::{CheckRecord, Num, Verdict};
use crate::sim::{walk_path, PathBundle, SimConfig};
use crate::stats::{mean, Bootstrap, MCEstimate, ABS_FLOOR, K_SIGMA};

/// Poincaré constant at time 1.
pub const POINCARE_CONSTANT: f64 = 1.0;
/// Log-Sobolev constant at time 1.
pub const LSI_CONSTANT: f64 = 2.0;
/// Required RMS reduction of the exponential-identity residual per doubling.
pub const GIRSANOV_RATIO: f64 = 1.4;
/// Pathwise tolerance of the terminal identity `l_T = f(x_T)`.
pub const TERMINAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    Equal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub value: Num,
    pub stderr: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub function: String,
    pub n: usize,
    pub paths: usize,
    pub steps: usize,
    pub horizon: Num,
    pub seed: u64,
}

impl RunMeta {
    fn of(function: String, paths: &PathBundle) -> Self {
        let c = paths.config();
        Self {
            function,
            n: c.n,
            paths: c.n_paths,
            steps: c.steps,
            horizon: Num(c.horizon),
            seed: c.seed.master,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub inequality: String,
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    /// `rhs − lhs` and the standard error of the per-sample slack.
    pub slack: Slack,
    /// Constant multiplying the Dirichlet side at time 1.
    pub constant: Num,
    pub relation: Relation,
    pub k_sigma: Num,
    pub verdict: Verdict,
    /// The function lies outside the bounded-derivative class of the theorem.
    pub outside_hypotheses: bool,
    pub meta: RunMeta,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    /// Slack positive beyond `k_sigma` standard errors.
    pub fn strict(&self) -> bool {
        self.slack.value.0 > self.k_sigma.0 * self.slack.stderr.0
    }

    pub fn record(&self) -> CheckRecord {
        let rel = match self.relation {
            Relation::AtMost => "le",
            Relation::Equal => "eq",
        };
        let mut note = format!("c={} slack={}", self.constant, self.slack.value);
        if self.outside_hypotheses {
            note.push_str(" outside_hypotheses");
        }
        CheckRecord::new(
            format!("{}/{}/{rel}", self.inequality, self.meta.function),
            self.lhs.value(),
            self.rhs.value(),
            Some(self.slack.stderr.0),
            self.passed(),
        )
        .with_note(note)
    }
}

/// Options shared by [`poincare_check_with`] and [`logsobolev_check_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOptions {
    pub constant: f64,
    pub relation: Relation,
    pub k_sigma: f64,
    /// Attach a bootstrap interval to entropy estimates.
    pub bootstrap: bool,
}

impl CheckOptions {
    pub fn poincare() -> Self {
        Self {
            constant: POINCARE_CONSTANT,
            relation: Relation::AtMost,
            k_sigma: K_SIGMA,
            bootstrap: false,
        }
    }

    pub fn logsobolev() -> Self {
        Self {
            constant: LSI_CONSTANT,
            bootstrap: true,
            ..Self::poincare()
        }
    }

    pub fn equality(mut self) -> Self {
        self.relation = Relation::Equal;
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = c;
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k_sigma = k;
        self
    }
}

fn verdict(lhs: f64, rhs: f64, se: f64, relation: Relation, k: f64) -> bool {
    let tol = k * se + ABS_FLOOR * lhs.abs().max(rhs.abs()).max(1.0);
    match relation {
        Relation::AtMost => lhs <= rhs + tol,
        Relation::Equal => (lhs - rhs).abs() <= tol,
    }
}

/// Terminal values `f(x_T)` and energies `|∇_H f|²(x_T)` per path.
fn terminal_samples<F: SmoothFunction + ?Sized>(f: &F, paths: &PathBundle) -> Result<(Vec<f64>, Vec<f64>)> {
    if f.n() != paths.n() {
        return usage(format!("function on H_{} with paths on H_{}", f.n(), paths.n()));
    }
    if !f.capabilities().gradient {
        return Err(Error::Capability(format!("{} provides no gradient", f.name())));
    }
    let rec = paths.terminal_index();
    let d = 2 * paths.n() + 1;
    let pairs: Vec<(f64, f64)> = (0..paths.n_paths())
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |buf, j| -> Result<(f64, f64)> {
                paths.fill_point(j, rec, false, buf);
                let p = GroupPoint::from_coords(buf)?;
                let g = horizontal_gradient(f, &p)?;
                Ok((f.value(&p), g.iter().map(|v| v * v).sum()))
            },
        )
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Sample mean of `|∇_H f(x_T)|²`.
pub fn dirichlet_rhs<F: SmoothFunction + ?Sized>(f: &F, paths: &PathBundle) -> Result<MCEstimate> {
    Ok(MCEstimate::from_samples(&terminal_samples(f, paths)?.1))
}

pub fn poincare_check<F: SmoothFunction + ?Sized>(f: &F, paths: &PathBundle) -> Result<InequalityReport> {
    poincare_check_with(f, paths, CheckOptions::poincare())
}

/// `Var f(x_T) ≤ c·T·E|∇_H f(x_T)|²`, with `c = 1` the sharp constant.
pub fn poincare_check_with<F: SmoothFunction + ?Sized>(
    f: &F,
    paths: &PathBundle,
    opts: CheckOptions,
) -> Result<InequalityReport> {
    let (vals, energy) = terminal_samples(f, paths)?;
    let m = mean(&vals);
    let dev: Vec<f64> = vals.iter().map(|v| (v - m) * (v - m)).collect();
    let scale = opts.constant * paths.horizon();
    let scaled: Vec<f64> = energy.iter().map(|e| scale * e).collect();
    let slack: Vec<f64> = scaled.iter().zip(&dev).map(|(e, d)| e - d).collect();
    Ok(assemble(
        "poincare",
        f,
        paths,
        opts,
        MCEstimate::from_samples(&dev),
        MCEstimate::from_samples(&scaled),
        MCEstimate::from_samples(&slack).stderr(),
    ))
}

fn assemble<F: SmoothFunction + ?Sized>(
    name: &str,
    f: &F,
    paths: &PathBundle,
    opts: CheckOptions,
    lhs: MCEstimate,
    rhs: MCEstimate,
    slack_se: f64,
) -> InequalityReport {
    let ok = verdict(lhs.value(), rhs.value(), slack_se, opts.relation, opts.k_sigma);
    InequalityReport {
        inequality: name.to_string(),
        slack: Slack {
            value: Num(rhs.value() - lhs.value()),
            stderr: Num(slack_se),
        },
        lhs,
        rhs,
        constant: Num(opts.constant),
        relation: opts.relation,
        k_sigma: Num(opts.k_sigma),
        verdict: Verdict::from_bool(ok),
        outside_hypotheses: !f.bounded_derivatives(),
        meta: RunMeta::of(f.name(), paths),
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn check_entropy_input(g: &[f64]) -> Result<f64> {
    if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("entropy sample {i} is {v}; need finite g >= 0")));
    }
    let m = mean(g);
    if m <= 0.0 {
        return Err(Error::Domain("entropy of a function with zero mean".into()));
    }
    Ok(m)
}

/// Influence values `g log g − (log ḡ + 1) g` whose mean differs from the
/// entropy estimate by the constant `ḡ`.
fn entropy_influence(g: &[f64], m: f64) -> Vec<f64> {
    let c = m.ln() + 1.0;
    g.iter().map(|&v| xlogx(v) - c * v).collect()
}

/// Plug-in estimate of `E[g log g] − E[g] log E[g]`, standard error from
/// the influence function and, when `boot` is given, a percentile interval.
pub fn entropy_estimate(g: &[f64], boot: Option<&Bootstrap>) -> Result<MCEstimate> {
    let m = check_entropy_input(g)?;
    let glogg: Vec<f64> = g.iter().map(|&v| xlogx(v)).collect();
    let value = mean(&glogg) - xlogx(m);
    let stderr = MCEstimate::from_samples(&entropy_influence(g, m)).stderr();
    let est = MCEstimate::new(value, stderr, g.len());
    Ok(match boot {
        Some(b) if b.replicates > 0 => {
            let (lo, hi) = b.interval(g.len(), |idx| {
                let (mut s, mut sl) = (0.0, 0.0);
                for &i in idx {
                    s += g[i];
                    sl += glogg[i];
                }
                let k = idx.len() as f64;
                sl / k - xlogx(s / k)
            });
            est.with_interval(lo, hi)
        }
        _ => est,
    })
}

pub fn logsobolev_check<F: SmoothFunction + ?Sized>(f: &F, paths: &PathBundle) -> Result<InequalityReport> {
    logsobolev_check_with(f, paths, CheckOptions::logsobolev())
}

/// `Ent f²(x_T) ≤ c·T·E|∇_H f(x_T)|²`, with `c = 2` the sharp constant.
pub fn logsobolev_check_with<F: SmoothFunction + ?Sized>(
    f: &F,
    paths: &PathBundle,
    opts: CheckOptions,
) -> Result<InequalityReport> {
    let (vals, energy) = terminal_samples(f, paths)?;
    let g: Vec<f64> = vals.iter().map(|v| v * v).collect();
    let boot = Bootstrap::new(paths.config().seed.master);
    let lhs = entropy_estimate(&g, opts.bootstrap.then_some(&boot))?;
    let infl = entropy_influence(&g, mean(&g));
    let scale = opts.constant * paths.horizon();
    let scaled: Vec<f64> = energy.iter().map(|e| scale * e).collect();
    let slack: Vec<f64> = scaled.iter().zip(&infl).map(|(e, d)| e - d).collect();
    Ok(assemble(
        "logsobolev",
        f,
        paths,
        opts,
        lhs,
        MCEstimate::from_samples(&scaled),
        MCEstimate::from_samples(&slack).stderr(),
    ))
}

/// Equality cases: Poincaré on every linear coordinate and log-Sobolev on
/// `exp(λ x_1 / 2)` for `λ ∈ {0.5, 1}`.
pub fn equality_suite(paths: &PathBundle, k_sigma: f64) -> Result<Vec<InequalityReport>> {
    let n = paths.n();
    let mut out = Vec::new();
    for c in (1..=n).map(Coord::X).chain((1..=n).map(Coord::Y)) {
        let f = registry::coordinate(n, c);
        out.push(poincare_check_with(&f, paths, CheckOptions::poincare().equality().with_k(k_sigma))?);
    }
    for lambda in [0.5, 1.0] {
        let f = ExpLinear::new(n, lambda);
        out.push(logsobolev_check_with(&f, paths, CheckOptions::logsobolev().equality().with_k(k_sigma))?);
    }
    Ok(out)
}

/// Closed form `(λ²/2) e^{λ²/2}` of both sides of the log-Sobolev equality
/// case at time 1.
pub fn lsi_extremal_value(lambda: f64) -> f64 {
    let h = lambda * lambda / 2.0;
    h * h.exp()
}

/// Per-path trajectories on the recorded grid. `u` is stacked as
/// `(X̂_1..X̂_n, Ŷ_1..Ŷ_n)`, matching the drivers `W = (b, w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GirsanovState {
    pub n: usize,
    pub n_paths: usize,
    pub record_steps: Vec<usize>,
    pub times: Vec<f64>,
    /// `[path][record]`.
    pub l: Vec<f64>,
    /// `[path][record][component]`.
    pub u: Vec<f64>,
    /// `[path][record][component]`, drivers `(b, w)`.
    pub w: Vec<f64>,
    /// `l_T` per path: the density of `ν` against `P`.
    pub weights: Vec<f64>,
}

impl GirsanovState {
    pub fn l(&self, path: usize, rec: usize) -> f64 {
        self.l[path * self.times.len() + rec]
    }

    pub fn u(&self, path: usize, rec: usize) -> &[f64] {
        let d = 2 * self.n;
        let o = (path * self.times.len() + rec) * d;
        &self.u[o..o + d]
    }

    pub fn w(&self, path: usize, rec: usize) -> &[f64] {
        let d = 2 * self.n;
        let o = (path * self.times.len() + rec) * d;
        &self.w[o..o + d]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GirsanovOptions {
    pub k_sigma: f64,
    /// Number of equal time windows for the ν-Brownianity checks.
    pub windows: usize,
    /// Also run at half the step count for the residual refinement ratio.
    pub refinement: bool,
}

impl Default for GirsanovOptions {
    fn default() -> Self {
        Self {
            k_sigma: K_SIGMA,
            windows: 4,
            refinement: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GirsanovCheck {
    pub name: String,
    pub lhs: Num,
    pub rhs: Num,
    pub stderr: Option<Num>,
    pub passed: bool,
}

impl GirsanovCheck {
    fn paired(name: String, lhs: &[f64], rhs: &[f64], k: f64, relation: Relation) -> Self {
        let l = mean(lhs);
        let r = mean(rhs);
        let diff: Vec<f64> = rhs.iter().zip(lhs).map(|(b, a)| b - a).collect();
        let se = MCEstimate::from_samples(&diff).stderr();
        Self {
            name,
            lhs: Num(l),
            rhs: Num(r),
            stderr: Some(Num(se)),
            passed: verdict(l, r, se, relation, k),
        }
    }

    fn zero(name: String, samples: &[f64], k: f64) -> Self {
        let e = MCEstimate::from_samples(samples);
        Self {
            name,
            lhs: e.value,
            rhs: Num(0.0),
            stderr: Some(e.stderr),
            passed: e.consistent_with(0.0, k),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GirsanovReport {
    pub function: String,
    /// Exact `E[f(x_T)]` used to normalize `f`.
    pub normalizer: Num,
    /// `l_0`, equal to 1 after normalization.
    pub l0: Num,
    pub weights_mean: MCEstimate,
    /// Largest `|l_T − f(x_T)| / max(1, f(x_T))`.
    pub terminal_gap: Num,
    pub residual_rms: Num,
    pub residual_max: Num,
    /// RMS at half the steps, when refinement was requested.
    pub coarse_residual_rms: Option<Num>,
    pub refinement_ratio: Option<Num>,
    pub checks: Vec<GirsanovCheck>,
    pub meta: RunMeta,
}

impl GirsanovReport {
    pub fn terminal_ok(&self) -> bool {
        self.terminal_gap.0 <= TERMINAL_TOL
    }

    pub fn refinement_ok(&self) -> bool {
        match (self.coarse_residual_rms, self.refinement_ratio) {
            (Some(c), _) if c.0 == 0.0 && self.residual_rms.0 == 0.0 => true,
            (_, Some(r)) => r.0 >= GIRSANOV_RATIO,
            _ => true,
        }
    }

    pub fn check(&self, name: &str) -> Option<&GirsanovCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Checks whose name starts with `prefix`.
    pub fn checks_with(&self, prefix: &str) -> Vec<&GirsanovCheck> {
        self.checks.iter().filter(|c| c.name.starts_with(prefix)).collect()
    }

    pub fn passed(&self) -> bool {
        self.terminal_ok() && self.refinement_ok() && self.checks.iter().all(|c| c.passed)
    }

    pub fn records(&self) -> Vec<CheckRecord> {
        let p = format!("girsanov/{}", self.function);
        let mut out = vec![CheckRecord::new(
            format!("{p}/terminal_identity"),
            self.terminal_gap.0,
            TERMINAL_TOL,
            None,
            self.terminal_ok(),
        )];
        if let (Some(c), Some(r)) = (self.coarse_residual_rms, self.refinement_ratio) {
            out.push(
                CheckRecord::new(format!("{p}/residual_ratio"), r.0, GIRSANOV_RATIO, None, self.refinement_ok())
                    .with_note(format!("rms {} -> {}", c, self.residual_rms)),
            );
        }
        out.extend(self.checks.iter().map(|c| {
            let mut r = CheckRecord::new(format!("{p}/{}", c.name), c.lhs.0, c.rhs.0, c.stderr.map(|s| s.0), c.passed);
            if c.name == "lsi_bound" {
                r = r.with_note("intermediate bound, reported");
            }
            r
        }));
        out
    }
}

struct PathRun {
    residual: f64,
    int_u2: f64,
    l_terminal: f64,
    f_terminal: f64,
    energy_over_f: f64,
    /// `[window][component]` drift-corrected increments.
    windows: Vec<f64>,
    l_rec: Vec<f64>,
    u_rec: Vec<f64>,
    w_rec: Vec<f64>,
}

struct Engine {
    n: usize,
    horizon: f64,
    l: SemigroupSeries,
    u: Vec<SemigroupSeries>,
    f: CompiledPoly,
    grad: Vec<CompiledPoly>,
}

impl Engine {
    fn new(f: &HPolynomial, horizon: f64) -> Result<Self> {
        let n = f.n();
        let l = SemigroupSeries::new(&poly::mirror(f))?;
        let u = (1..=n)
            .map(FieldId::xhat)
            .chain((1..=n).map(FieldId::yhat))
            .map(|fld| l.map(|q| poly::poly_apply_field(fld, q)))
            .collect::<Result<_>>()?;
        let grad = FieldId::horizontal(n)
            .into_iter()
            .map(|fld| poly::poly_apply_field(fld, f).map(|p| CompiledPoly::new(&p)))
            .collect::<Result<_>>()?;
        Ok(Self {
            n,
            horizon,
            l,
            u,
            f: CompiledPoly::new(f),
            grad,
        })
    }

    fn run(&self, config: &SimConfig, path: usize, windows: usize, record: &[usize]) -> Result<PathRun> {
        let n = self.n;
        let d = 2 * n;
        let dt = config.dt();
        let steps = config.steps;
        let mut y = vec![0.0; d + 1];
        let mut u = vec![0.0; d];
        let mut out = PathRun {
            residual: 0.0,
            int_u2: 0.0,
            l_terminal: 0.0,
            f_terminal: 0.0,
            energy_over_f: 0.0,
            windows: vec![0.0; windows * d],
            l_rec: Vec::with_capacity(record.len()),
            u_rec: Vec::with_capacity(record.len() * d),
            w_rec: Vec::with_capacity(record.len() * d),
        };
        let mut acc = 0.0;
        let mut bad: Option<(usize, f64)> = None;
        walk_path(config, path, false, |ev| {
            if bad.is_some() {
                return;
            }
            ev.fill_point(true, &mut y);
            let s = (self.horizon - ev.time).max(0.0);
            let l = if ev.is_last() { self.l.eval(0.0, &y) } else { self.l.eval(s, &y) };
            if !(l > 0.0) {
                bad = Some((ev.step, l));
                return;
            }
            for (j, series) in self.u.iter().enumerate() {
                u[j] = series.eval(s, &y) / l;
            }
            if record.binary_search(&ev.step).is_ok() {
                out.l_rec.push(l);
                out.u_rec.extend_from_slice(&u);
                out.w_rec.extend_from_slice(ev.b);
                out.w_rec.extend_from_slice(ev.w);
            }
            if ev.is_last() {
                ev.fill_point(false, &mut y);
                let fx = self.f.eval(&y);
                let energy: f64 = self.grad.iter().map(|g| g.eval(&y).powi(2)).sum();
                out.l_terminal = l;
                out.f_terminal = fx;
                out.energy_over_f = energy / fx;
                out.residual = l.ln() + acc;
                return;
            }
            let win = ev.step * windows / steps;
            let mut u2 = 0.0;
            for j in 0..d {
                let dw = if j < n { ev.db[j] } else { ev.dw[j - n] };
                acc += u[j] * dw;
                u2 += u[j] * u[j];
                out.windows[win * d + j] += dw + u[j] * dt;
            }
            acc += 0.5 * u2 * dt;
            out.int_u2 += u2 * dt;
        });
        match bad {
            Some((step, value)) => Err(Error::NonPositiveDensity { path, step, value }),
            None => Ok(out),
        }
    }

    fn run_all(&self, config: &SimConfig, windows: usize, record: &[usize]) -> Result<Vec<PathRun>> {
        let runs: Vec<Result<PathRun>> = (0..config.n_paths)
            .into_par_iter()
            .map(|j| self.run(config, j, windows, record))
            .collect();
        runs.into_iter().collect()
    }
}

fn rms(xs: &[f64]) -> f64 {
    let sq: Vec<f64> = xs.iter().map(|r| r * r).collect();
    mean(&sq).sqrt()
}

/// Builds the exponential martingale `l_t = Q_{T−t}(f∘A)(y_t)` for a
/// positive polynomial `f`, normalized exactly so that `E[f(x_T)] = 1`, and
/// checks the identities of the change of measure `dν = l_T dP`.
pub fn girsanov_diagnostics(
    f: &HPolynomial,
    config: &SimConfig,
    opts: GirsanovOptions,
) -> Result<(GirsanovReport, GirsanovState)> {
    config.validate()?;
    if f.n() != config.n {
        return usage(format!("function on H_{} with paths on H_{}", f.n(), config.n));
    }
    if opts.windows == 0 || opts.windows > config.steps {
        return usage(format!("windows must lie in 1..={}", config.steps));
    }
    let name = PolyFunction::new(f.clone()).name();
    let n = config.n;
    let d = 2 * n;
    let origin = vec![0.0; d + 1];
    let normalizer = SemigroupSeries::new(f)?.eval(config.horizon, &origin);
    if !(normalizer > 0.0) {
        return Err(Error::Domain(format!("E[f(x_T)] = {normalizer} is not positive")));
    }
    let f = f.scale(1.0 / normalizer);
    let engine = Engine::new(&f, config.horizon)?;
    let l0 = engine.l.eval(config.horizon, &origin);

    let record = config.recorded_steps();
    let runs = engine.run_all(config, opts.windows, &record)?;
    let k = opts.k_sigma;

    let weights: Vec<f64> = runs.iter().map(|r| r.l_terminal).collect();
    let residuals: Vec<f64> = runs.iter().map(|r| r.residual).collect();
    let terminal_gap = runs
        .iter()
        .map(|r| (r.l_terminal - r.f_terminal).abs() / r.f_terminal.abs().max(1.0))
        .fold(0.0, f64::max);

    let mut checks = vec![GirsanovCheck::zero(
        "weights_mean".into(),
        &weights.iter().map(|w| w - 1.0).collect::<Vec<_>>(),
        k,
    )];
    checks[0].lhs = Num(mean(&weights));
    checks[0].rhs = Num(1.0);

    for win in 0..opts.windows {
        let len = (0..config.steps).filter(|s| s * opts.windows / config.steps == win).count();
        let span = len as f64 * config.dt();
        for j in 0..d {
            let s: Vec<f64> = runs.iter().map(|r| r.l_terminal * r.windows[win * d + j]).collect();
            let comp = if j < n { format!("b{}", j + 1) } else { format!("w{}", j - n + 1) };
            checks.push(GirsanovCheck::zero(format!("nu_mean/window{win}/{comp}"), &s, k));
        }
        let s: Vec<f64> = runs
            .iter()
            .map(|r| {
                let q: f64 = r.windows[win * d..(win + 1) * d].iter().map(|v| v * v).sum();
                r.l_terminal * (q - d as f64 * span)
            })
            .collect();
        checks.push(GirsanovCheck::zero(format!("nu_second_moment/window{win}"), &s, k));
    }

    let lhs: Vec<f64> = weights.iter().map(|&w| xlogx(w)).collect();
    let rhs: Vec<f64> = runs.iter().map(|r| 0.5 * r.l_terminal * r.int_u2).collect();
    checks.push(GirsanovCheck::paired("entropy_identity".into(), &lhs, &rhs, k, Relation::Equal));
    let bound: Vec<f64> = runs.iter().map(|r| 0.5 * config.horizon * r.energy_over_f).collect();
    checks.push(GirsanovCheck::paired("lsi_bound".into(), &lhs, &bound, k, Relation::AtMost));

    let residual_rms = rms(&residuals);
    let (coarse_residual_rms, refinement_ratio) = if opts.refinement && config.steps >= 2 {
        let coarse_cfg = SimConfig {
            record_every: config.steps / 2,
            ..config.with_steps(config.steps / 2)
        };
        let coarse = engine.run_all(&coarse_cfg, 1, &[])?;
        let c = rms(&coarse.iter().map(|r| r.residual).collect::<Vec<_>>());
        let ratio = if residual_rms == 0.0 { f64::INFINITY } else { c / residual_rms };
        (Some(Num(c)), Some(Num(ratio)))
    } else {
        (None, None)
    };

    let meta = RunMeta {
        function: name.clone(),
        n,
        paths: config.n_paths,
        steps: config.steps,
        horizon: Num(config.horizon),
        seed: config.seed.master,
    };
    let report = GirsanovReport {
        function: name,
        normalizer: Num(normalizer),
        l0: Num(l0),
        weights_mean: MCEstimate::from_samples(&weights),
        terminal_gap: Num(terminal_gap),
        residual_max: Num(residuals.iter().fold(0.0, |m, r| m.max(r.abs()))),
        residual_rms: Num(residual_rms),
        coarse_residual_rms,
        refinement_ratio,
        checks,
        meta,
    };
    let nrec = record.len();
    let mut state = GirsanovState {
        n,
        n_paths: config.n_paths,
        times: record.iter().map(|&s| config.time_of(s)).collect(),
        record_steps: record,
        l: Vec::with_capacity(config.n_paths * nrec),
        u: Vec::with_capacity(config.n_paths * nrec * d),
        w: Vec::with_capacity(config.n_paths * nrec * d),
        weights,
    };
    for r in runs {
        state.l.extend(r.l_rec);
        state.u.extend(r.u_rec);
        state.w.extend(r.w_rec);
    }
    Ok((report, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::registry::GaussBump;
    use crate::sim::simulate;

    fn bundle(n: usize, paths: usize, steps: usize, seed: u64) -> PathBundle {
        simulate(&SimConfig::new(n, paths, steps, 1.0, seed).recording_every(steps)).unwrap()
    }

    #[test]
    fn dirichlet_examples() {
        let paths = bundle(1, 20_000, 128, 1);
        let one = registry::constant(1, 3.0);
        let e = dirichlet_rhs(&one, &paths).unwrap();
        assert_eq!((e.value(), e.stderr()), (0.0, 0.0));
        let x = registry::coordinate(1, Coord::X(1));
        let e = dirichlet_rhs(&x, &paths).unwrap();
        assert_eq!((e.value(), e.stderr()), (1.0, 0.0));
        let z = registry::coordinate(1, Coord::Z);
        assert!(dirichlet_rhs(&z, &paths).unwrap().consistent_with(0.5, 3.0));
    }

    #[test]
    fn poincare_examples() {
        let paths = bundle(1, 50_000, 256, 2);
        let x = registry::coordinate(1, Coord::X(1));
        let eq = poincare_check_with(&x, &paths, CheckOptions::poincare().equality()).unwrap();
        assert!(eq.passed());
        let z = registry::coordinate(1, Coord::Z);
        let r = poincare_check(&z, &paths).unwrap();
        assert!(r.passed() && r.strict(), "{r:?}");
        assert!((r.lhs.value() - 0.25).abs() < 0.02 && (r.rhs.value() - 0.5).abs() < 0.02);
        let c = poincare_check(&registry::constant(1, 1.0), &paths).unwrap();
        assert!(c.passed() && c.lhs.value() == 0.0 && c.rhs.value() == 0.0);
    }

    #[test]
    fn entropy_examples() {
        let ones = vec![1.0; 100];
        let e = entropy_estimate(&ones, Some(&Bootstrap::new(1))).unwrap();
        assert_eq!(e.value(), 0.0);
        assert!(matches!(entropy_estimate(&[1.0, -0.5], None), Err(Error::Domain(_))));
        assert!(matches!(entropy_estimate(&[0.0, 0.0], None), Err(Error::Domain(_))));

        let paths = bundle(1, 50_000, 16, 3);
        let rec = paths.terminal_index();
        let g: Vec<f64> = (0..paths.n_paths()).map(|j| paths.state(j, rec)[0].exp()).collect();
        let e = entropy_estimate(&g, Some(&Bootstrap::new(9))).unwrap();
        let (lo, hi) = e.interval.unwrap();
        assert!(lo.0 <= 0.8244 && 0.8244 <= hi.0, "{e:?}");
        assert!((lsi_extremal_value(1.0) - 0.824_360_635_350_064).abs() < 1e-12);
    }

    #[test]
    fn logsobolev_examples() {
        let paths = bundle(1, 50_000, 128, 4);
        let c = logsobolev_check(&registry::constant(1, 2.0), &paths).unwrap();
        assert!(c.passed() && c.lhs.value().abs() < 1e-12 && c.rhs.value() == 0.0);
        let f = ExpLinear::new(1, 1.0);
        let r = logsobolev_check_with(&f, &paths, CheckOptions::logsobolev().equality()).unwrap();
        assert!(r.passed() && r.outside_hypotheses, "{r:?}");
        let bump = GaussBump::new(1);
        let r = logsobolev_check(&bump, &paths).unwrap();
        assert!(r.passed() && r.strict() && !r.outside_hypotheses, "{r:?}");
    }

    #[test]
    fn scale_equivariance() {
        let paths = bundle(1, 5_000, 64, 5);
        let z = registry::coordinate(1, Coord::Z);
        let a = poincare_check(&z, &paths).unwrap();
        let zs = crate::group::Scaled { inner: &z, factor: 3.0 };
        let b = poincare_check(&zs, &paths).unwrap();
        assert!((b.lhs.value() - 9.0 * a.lhs.value()).abs() < 1e-12 * b.lhs.value());
        assert!((b.rhs.value() - 9.0 * a.rhs.value()).abs() < 1e-12 * b.rhs.value());
        assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn girsanov_constant_function() {
        let cfg = SimConfig::new(1, 200, 64, 1.0, 6).recording_every(16);
        let (rep, state) = girsanov_diagnostics(&HPolynomial::constant(1, 3.0), &cfg, GirsanovOptions::default()).unwrap();
        assert_eq!(rep.residual_max.0, 0.0);
        assert!(state.l.iter().all(|&l| l == 1.0) && state.u.iter().all(|&u| u == 0.0));
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn girsanov_worked_example() {
        let f = &HPolynomial::constant(1, 0.5) + &HPolynomial::monomial(1, vec![2, 0, 0], 0.5);
        let cfg = SimConfig::new(1, 500, 64, 1.0, 7).recording_every(16);
        let (rep, state) = girsanov_diagnostics(&f, &cfg, GirsanovOptions::default()).unwrap();
        assert!((rep.normalizer.0 - 1.0).abs() < 1e-15 && (rep.l0.0 - 1.0).abs() < 1e-15);
        for p in 0..cfg.n_paths {
            for (r, &t) in state.times.iter().enumerate() {
                let b = state.w(p, r)[0];
                let l = (2.0 - t + b * b) / 2.0;
                assert!((state.l(p, r) - l).abs() < 1e-12);
                assert!((state.u(p, r)[0] + b / l).abs() < 1e-12);
                assert_eq!(state.u(p, r)[1], 0.0);
            }
        }
        assert!(rep.terminal_ok());
        assert!(rep.refinement_ratio.unwrap().0 > 1.0);
    }

    #[test]
    fn girsanov_rejects_nonpositive_density() {
        let f = &HPolynomial::monomial(1, vec![1, 0, 0], 1.0) + &HPolynomial::constant(1, 0.1);
        let cfg = SimConfig::new(1, 50, 16, 1.0, 8);
        assert!(girsanov_diagnostics(&f, &cfg, GirsanovOptions::default()).is_err());
    }

    #[test]
    fn equality_suite_runs() {
        let paths = bundle(2, 20_000, 64, 9);
        let reps = equality_suite(&paths, 3.0).unwrap();
        assert_eq!(reps.len(), 6);
        assert!(reps.iter().all(|r| r.relation == Relation::Equal));
    }
}
