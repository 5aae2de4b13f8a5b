//! Run configuration and the verification suites behind the `verify` binary.
//!
//! Every suite returns plain [`CheckRecord`]s; [`run_checks`] tags them with
//! the suite name and seed, and [`run_suite`] turns the outcome into an exit
//! code.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::group::registry;
use crate::group::{
    apply_field, bracket, mirror, star, Derivatives, FieldId, GroupPoint, Mirrored, SmoothFunction,
};
use crate::inequality::{self, CheckOptions, GirsanovOptions};
use crate::mc::{self, Probe, TestFn};
use crate::poly::{self, basis_monomials, HPolynomial, PolyFunction, SemigroupSeries};
use crate::report::{self, CheckRecord, Format, Report};
use crate::sim::{self, PathBundle, SimConfig};
pub use crate::stats::DISCRETIZATION_C;
use crate::stats::{independent_stderr, MCEstimate, ABS_FLOOR, K_SIGMA};

/// Tolerance for exact algebraic and polynomial identities.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for pointwise identities evaluated through gradients.
pub const POINTWISE_TOL: f64 = 1e-10;
/// Required reduction of the z²-moment bias per step doubling.
pub const BIAS_RATIO: f64 = 1.5;
/// Coarse step count and sample size of the bias-halving ladder.
pub const BIAS_LADDER_STEPS: usize = 8;
pub const BIAS_LADDER_PATHS: usize = 1_000_000;
/// Sample size and coarse step count of the representation refinement.
pub const REPRESENTATION_PATHS: usize = 10_000;
pub const REPRESENTATION_STEPS: usize = 1024;
/// Random points per exact pointwise identity.
pub const RANDOM_POINTS: usize = 100;
/// Random base points for the coupled mirror checks.
pub const MIRROR_POINTS: usize = 20;
/// Highest monomial weight in the exact operator suite.
pub const OPERATOR_MAX_WEIGHT: u32 = 8;
/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "HLAB_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Algebra,
    Simulate,
    Intertwine,
    Martingale,
    Poincare,
    Logsobolev,
    Girsanov,
    All,
}

impl Suite {
    pub const CONCRETE: [Suite; 7] = [
        Suite::Algebra,
        Suite::Simulate,
        Suite::Intertwine,
        Suite::Martingale,
        Suite::Poincare,
        Suite::Logsobolev,
        Suite::Girsanov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Simulate => "simulate",
            Suite::Intertwine => "intertwine",
            Suite::Martingale => "martingale",
            Suite::Poincare => "poincare",
            Suite::Logsobolev => "logsobolev",
            Suite::Girsanov => "girsanov",
            Suite::All => "all",
        }
    }

    /// Concrete suites in canonical order, without duplicates.
    pub fn expand(list: &[Suite]) -> Vec<Suite> {
        if list.contains(&Suite::All) {
            return Suite::CONCRETE.to_vec();
        }
        let mut v = list.to_vec();
        v.sort();
        v.dedup();
        v
    }

    fn needs_paths(self) -> bool {
        !matches!(self, Suite::Algebra | Suite::Girsanov)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub seed: u64,
    pub suites: Vec<Suite>,
    /// Multiplies the 3-standard-error rule of every statistical check.
    pub tolerance_scale: f64,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare_to: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 1,
            paths: 100_000,
            steps: 4096,
            horizon: 1.0,
            seed: 7,
            suites: vec![Suite::All],
            tolerance_scale: 1.0,
            format: Format::Json,
            out_dir: None,
            compare_to: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("config file: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.paths == 0 || self.steps == 0 {
            return usage(format!(
                "n, paths and steps must be positive (n={}, paths={}, steps={})",
                self.n, self.paths, self.steps
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return usage(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.tolerance_scale.is_finite() && self.tolerance_scale > 0.0) {
            return usage(format!("tolerance scale must be positive, got {}", self.tolerance_scale));
        }
        if self.suites.is_empty() {
            return usage("no suite selected");
        }
        Ok(())
    }

    pub fn k_sigma(&self) -> f64 {
        K_SIGMA * self.tolerance_scale
    }

    /// Simulation settings, recording the quarter times when the grid allows.
    pub fn sim_config(&self) -> SimConfig {
        let every = if self.steps.is_multiple_of(4) { self.steps / 4 } else { self.steps };
        SimConfig::new(self.n, self.paths, self.steps, self.horizon, self.seed).recording_every(every)
    }

    pub fn label(&self) -> String {
        Suite::expand(&self.suites)
            .iter()
            .map(|s| s.name())
            .collect::<Vec<_>>()
            .join("+")
            .replace("algebra+simulate+intertwine+martingale+poincare+logsobolev+girsanov", "all")
    }

    pub fn output_path(&self) -> PathBuf {
        let dir = self
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("reports"));
        dir.join(format!("{}.{}", self.label(), self.format.extension()))
    }
}

fn exact(name: String, err: f64, tol: f64) -> CheckRecord {
    CheckRecord::new(name, err, tol, None, err <= tol)
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> GroupPoint {
    let mut u = || rng.random_range(-2.0..2.0);
    let x = (0..n).map(|_| u()).collect();
    let y = (0..n).map(|_| u()).collect();
    GroupPoint::new(x, y, u()).expect("finite")
}

fn scaled_gap(a: &GroupPoint, b: &GroupPoint) -> f64 {
    let scale = a.coords().iter().chain(&b.coords()).fold(1.0_f64, |m, v| m.max(v.abs()));
    a.max_abs_diff(b) / scale
}

/// A polynomial touching every monomial of weight ≤ 4, used where a
/// generic test function is needed.
pub fn generic_polynomial(n: usize) -> HPolynomial {
    let terms = basis_monomials(n, 4)
        .into_iter()
        .enumerate()
        .map(|(k, e)| (e, 1.0 / (1.0 + k as f64)));
    HPolynomial::from_terms(n, terms).expect("valid exponents")
}

/// Group-level identities at random points: the mirror is an involutive
/// automorphism, the law is associative, and `[X_i, Y_j] = δ_ij Z`.
///
/// Two pointwise intertwining relations are checked on test functions:
/// `(X_i f)(Ap) + X̂_i(f∘A)(p) = 0` with the right-invariant partner, which
/// fails whenever `f` depends on `z` (the defect is `y_i (Zf)(Ap)`), and
/// `(X_i f)(Ap) + X_i(f∘A)(p) = 0`, which holds because `A` is an
/// automorphism.
pub fn algebra_checks(n: usize, seed: u64) -> Result<Vec<CheckRecord>> {
    if n == 0 {
        return usage("n must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut auto: f64 = 0.0;
    let mut invol: f64 = 0.0;
    let mut assoc: f64 = 0.0;
    let mut inv: f64 = 0.0;
    let pts: Vec<GroupPoint> = (0..RANDOM_POINTS).map(|_| random_point(&mut rng, n)).collect();
    for (k, p) in pts.iter().enumerate() {
        let q = &pts[(k + 1) % pts.len()];
        let r = &pts[(k + 7) % pts.len()];
        auto = auto.max(scaled_gap(&mirror(&star(p, q)?), &star(&mirror(p), &mirror(q))?));
        invol = invol.max(scaled_gap(&mirror(&mirror(p)), p));
        assoc = assoc.max(scaled_gap(&star(&star(p, q)?, r)?, &star(p, &star(q, r)?)?));
        inv = inv.max(scaled_gap(&star(p, &crate::group::inverse(p))?, &GroupPoint::identity(n)));
    }
    let mut out = vec![
        exact(format!("n={n}/mirror_automorphism"), auto, EXACT_TOL),
        exact(format!("n={n}/mirror_involution"), invol, EXACT_TOL),
        exact(format!("n={n}/associativity"), assoc, EXACT_TOL),
        exact(format!("n={n}/inverse"), inv, EXACT_TOL),
    ];

    let generic = PolyFunction::named(generic_polynomial(n), "generic_w4".into());
    let bump = registry::GaussBump::new(n);
    let fns: [&dyn SmoothFunction; 2] = [&generic, &bump];
    let mut br: f64 = 0.0;
    for f in fns {
        for p in &pts {
            let zf = apply_field(FieldId::z(), f, p)?;
            for i in 1..=n {
                for j in 1..=n {
                    let v = bracket(FieldId::x(i), FieldId::y(j), f, p, Derivatives::Analytic)?;
                    let want = if i == j { zf } else { 0.0 };
                    br = br.max((v - want).abs() / want.abs().max(1.0));
                    let xx = bracket(FieldId::x(i), FieldId::x(j), f, p, Derivatives::Analytic)?;
                    let yy = bracket(FieldId::y(i), FieldId::y(j), f, p, Derivatives::Analytic)?;
                    br = br.max(xx.abs()).max(yy.abs());
                }
            }
        }
    }
    out.push(exact(format!("n={n}/bracket_XY_Z"), br, EXACT_TOL));

    let mut fns: Vec<std::sync::Arc<dyn SmoothFunction>> = registry::battery(n);
    fns.push(std::sync::Arc::new(generic));
    for f in &fns {
        let fa = Mirrored(&**f);
        let mut right: f64 = 0.0;
        let mut left: f64 = 0.0;
        for p in &pts {
            let ap = mirror(p);
            for i in 1..=n {
                for (l, r) in [(FieldId::x(i), FieldId::xhat(i)), (FieldId::y(i), FieldId::yhat(i))] {
                    let a = apply_field(l, &**f, &ap)?;
                    let scale = a.abs().max(1.0);
                    right = right.max((a + apply_field(r, &fa, p)?).abs() / scale);
                    left = left.max((a + apply_field(l, &fa, p)?).abs() / scale);
                }
            }
        }
        out.push(exact(format!("n={n}/intertwining_right_field/{}", f.name()), right, POINTWISE_TOL));
        out.push(exact(format!("n={n}/intertwining_left_field/{}", f.name()), left, POINTWISE_TOL));
    }
    Ok(out)
}

/// Exact operator identities on every monomial of weight ≤ `max_weight`:
/// intertwining in both forms (see [`algebra_checks`]), `[L, X̂_i] = [L, Ŷ_i] = 0`,
/// the semigroup law, mirror commutation and left-translation commutation.
pub fn operator_checks(n: usize, max_weight: u32) -> Result<Vec<CheckRecord>> {
    if n == 0 {
        return usage("n must be positive");
    }
    let (s, t) = (0.3, 0.45);
    let g = GroupPoint::new(
        (0..n).map(|i| 0.3 + 0.1 * i as f64).collect(),
        (0..n).map(|i| -0.7 + 0.2 * i as f64).collect(),
        0.4,
    )?;
    let mut intertwine: f64 = 0.0;
    let mut intertwine_left: f64 = 0.0;
    let mut commute: f64 = 0.0;
    let mut law: f64 = 0.0;
    let mut mirror_c: f64 = 0.0;
    let mut translate: f64 = 0.0;
    let rel = |a: &HPolynomial, b: &HPolynomial| -> f64 {
        let scale = a.max_abs_coeff().max(b.max_abs_coeff()).max(1.0);
        (a - b).max_abs_coeff() / scale
    };
    for e in basis_monomials(n, max_weight) {
        let p = HPolynomial::monomial(n, e, 1.0);
        let pa = poly::mirror(&p);
        let lp = poly::generator(&p);
        for i in 1..=n {
            for (l, r) in [(FieldId::x(i), FieldId::xhat(i)), (FieldId::y(i), FieldId::yhat(i))] {
                let a = poly::mirror(&poly::poly_apply_field(l, &p)?);
                let b = poly::poly_apply_field(r, &pa)?;
                intertwine = intertwine.max(rel(&a, &(-&b)));
                let b_left = poly::poly_apply_field(l, &pa)?;
                intertwine_left = intertwine_left.max(rel(&a, &(-&b_left)));
                let c1 = poly::generator(&poly::poly_apply_field(r, &p)?);
                let c2 = poly::poly_apply_field(r, &lp)?;
                commute = commute.max(rel(&c1, &c2));
            }
        }
        let series = SemigroupSeries::new(&p)?;
        let qt = series.at(t)?;
        law = law.max(rel(&poly::heat_semigroup(&qt, s)?, &series.at(s + t)?));
        mirror_c = mirror_c.max(rel(&poly::heat_semigroup(&pa, t)?, &poly::mirror(&qt)));
        translate = translate.max(rel(
            &poly::heat_semigroup(&poly::left_translate(&p, &g)?, t)?,
            &poly::left_translate(&qt, &g)?,
        ));
    }
    let tag = format!("n={n}/w<={max_weight}");
    Ok(vec![
        exact(format!("{tag}/intertwining_right_field"), intertwine, EXACT_TOL),
        exact(format!("{tag}/intertwining_left_field"), intertwine_left, EXACT_TOL),
        exact(format!("{tag}/generator_commutes_right_fields"), commute, EXACT_TOL),
        exact(format!("{tag}/semigroup_law"), law, EXACT_TOL),
        exact(format!("{tag}/mirror_commutation"), mirror_c, EXACT_TOL),
        exact(format!("{tag}/left_translation_commutation"), translate, EXACT_TOL),
    ])
}

fn terminal_samples(paths: &PathBundle, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
    use rayon::prelude::*;
    let rec = paths.terminal_index();
    let d = 2 * paths.n() + 1;
    (0..paths.n_paths())
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |buf, j| {
                paths.fill_point(j, rec, false, buf);
                f(buf)
            },
        )
        .collect()
}

/// Moment calibration at the horizon: every monomial of weight ≤ 4 against
/// the exact semigroup, within `k` standard errors plus `C·Δt` for moments
/// involving `z`.
pub fn moment_checks(paths: &PathBundle, k: f64) -> Result<Vec<CheckRecord>> {
    let n = paths.n();
    let dt = paths.config().dt();
    let origin = GroupPoint::identity(n);
    let mut out = Vec::new();
    for e in basis_monomials(n, 4) {
        if e.iter().all(|&v| v == 0) {
            continue;
        }
        let p = HPolynomial::monomial(n, e.clone(), 1.0);
        let want = poly::heat_semigroup(&p, paths.horizon())?.eval(&origin)?;
        let fc = poly::CompiledPoly::new(&p);
        let est = MCEstimate::from_samples(&terminal_samples(paths, |c| fc.eval(c)));
        let allowance = if e[2 * n] > 0 { DISCRETIZATION_C * dt } else { 0.0 };
        let ok = (est.value() - want).abs() <= k * est.stderr() + allowance + ABS_FLOOR;
        let name = PolyFunction::new(p).name();
        out.push(
            CheckRecord::new(format!("moment/{name}"), est.value(), want, Some(est.stderr()), ok)
                .with_note(format!("allowance {allowance:e}")),
        );
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasHalving {
    pub coarse_steps: usize,
    pub coarse: MCEstimate,
    pub fine: MCEstimate,
    /// `E[(½z_T)²]` in continuous time.
    pub exact: report::Num,
    pub ratio: report::Num,
    pub passed: bool,
}

impl BiasHalving {
    pub fn record(&self) -> CheckRecord {
        CheckRecord::new(
            format!("bias_halving/z2/{}->{}", self.coarse_steps, 2 * self.coarse_steps),
            self.ratio.0,
            BIAS_RATIO,
            None,
            self.passed,
        )
        .with_note(format!(
            "E z2: {} (K={}), {} (K={}), exact {}",
            self.coarse.value,
            self.coarse_steps,
            self.fine.value,
            2 * self.coarse_steps,
            self.exact
        ))
    }
}

/// Discrepancy of the `z²` moment at `coarse_steps` and twice that, on
/// independent bundles of `n_paths` paths. The bias `nT²/(4K)` must shrink
/// by at least [`BIAS_RATIO`].
pub fn bias_halving(n: usize, n_paths: usize, coarse_steps: usize, horizon: f64, seed: u64) -> Result<BiasHalving> {
    let exact = n as f64 * horizon * horizon / 4.0;
    let z2 = |steps: usize| -> Result<MCEstimate> {
        let cfg = SimConfig::new(n, n_paths, steps, horizon, seed).recording_every(steps);
        let b = sim::simulate(&cfg)?;
        Ok(MCEstimate::from_samples(&terminal_samples(&b, |c| c[2 * n] * c[2 * n])))
    };
    let coarse = z2(coarse_steps)?;
    let fine = z2(2 * coarse_steps)?;
    let ratio = (coarse.value() - exact).abs() / (fine.value() - exact).abs();
    Ok(BiasHalving {
        coarse_steps,
        passed: ratio >= BIAS_RATIO,
        coarse,
        fine,
        exact: report::Num(exact),
        ratio: report::Num(ratio),
    })
}

/// Seed of the independent mirrored-law bundle used for the distributional
/// half of the reflection lemma.
pub fn independent_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Reflection of the drivers keeps the Lévy area pathwise, and the law of
/// `y_T` matches that of `x_T` in the first four moments of every coordinate.
pub fn reflection_checks(paths: &PathBundle, k: f64) -> Result<Vec<CheckRecord>> {
    let cfg = paths.config();
    let gap = sim::levy_mirror_gap(cfg)?;
    let mut out = vec![exact("lemma2/pathwise_levy_gap".into(), gap, EXACT_TOL)];
    let other_cfg = SimConfig {
        record_every: cfg.steps,
        ..cfg.with_seed(independent_seed(cfg.seed.master))
    };
    let other = sim::mirror_paths(&sim::simulate(&other_cfg)?)?;
    let n = cfg.n;
    let names: Vec<String> = (1..=n)
        .map(|i| format!("b{i}"))
        .chain((1..=n).map(|i| format!("w{i}")))
        .chain(std::iter::once("z".to_string()))
        .collect();
    for (c, name) in names.iter().enumerate() {
        for pow in 1..=4 {
            let a = MCEstimate::from_samples(&terminal_samples(paths, |x| x[c].powi(pow)));
            let b = MCEstimate::from_samples(&terminal_samples(&other, |x| x[c].powi(pow)));
            let se = independent_stderr(&a, &b);
            let ok = (a.value() - b.value()).abs() <= k * se + ABS_FLOOR;
            out.push(CheckRecord::new(
                format!("lemma2/moment/{name}^{pow}"),
                a.value(),
                b.value(),
                Some(se),
                ok,
            ));
        }
    }
    Ok(out)
}

fn quarter_times(horizon: f64) -> [f64; 4] {
    [0.0, 0.25 * horizon, 0.5 * horizon, 0.75 * horizon]
}

fn require_quarters(paths: &PathBundle) -> Result<()> {
    if !paths.config().steps.is_multiple_of(4) {
        return usage(format!("steps must be a multiple of 4, got {}", paths.config().steps));
    }
    Ok(())
}

fn mono(n: usize, spec: &str) -> Result<HPolynomial> {
    registry::monomial(spec, n)
}

/// Coupled mirror checks at random base points and tower-property probes.
pub fn intertwine_checks(paths: &PathBundle, seed: u64, k: f64) -> Result<Vec<CheckRecord>> {
    require_quarters(paths)?;
    let n = paths.n();
    let t = paths.horizon();
    let mirrored = sim::mirror_paths(paths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let pts: Vec<GroupPoint> = (0..MIRROR_POINTS).map(|_| random_point(&mut rng, n)).collect();
    let mut fns: Vec<std::sync::Arc<dyn SmoothFunction>> = registry::battery(n);
    fns.push(std::sync::Arc::new(PolyFunction::named(generic_polynomial(n), "generic_w4".into())));
    let mut out = Vec::new();
    for f in &fns {
        let mut gap: f64 = 0.0;
        for p in &pts {
            gap = gap.max(mc::coupled_mirror_check_with(&**f, p, t, paths, &mirrored)?.max_gap.0);
        }
        out.push(exact(format!("coupled_mirror/{}", f.name()), gap, mc::COUPLED_TOL));
    }
    for spec in ["x1", "z", "z2", "x1y1"] {
        let f = mono(n, spec)?;
        for s in [0.25 * t, 0.5 * t] {
            out.extend(mc::tower_test(&f, s, t, &Probe::standard(), paths, k)?.records());
        }
    }
    Ok(out)
}

/// Martingale tests for `z², x_1y_1, x_1z` along `X_1, Y_1` and along the
/// right-invariant `X̂_1, Ŷ_1`, and the representation refinement for `z²`.
pub fn martingale_checks(paths: &PathBundle, k: f64) -> Result<Vec<CheckRecord>> {
    require_quarters(paths)?;
    let n = paths.n();
    let times = quarter_times(paths.horizon());
    let mut out = Vec::new();
    for spec in ["z2", "x1y1", "x1z"] {
        let f = mono(n, spec)?;
        for field in [FieldId::x(1), FieldId::y(1), FieldId::xhat(1), FieldId::yhat(1)] {
            out.extend(mc::martingale_test(TestFn::Poly(&f), field, &times, &Probe::standard(), paths, k, None)?.records());
        }
    }
    let cfg = SimConfig::new(n, REPRESENTATION_PATHS, REPRESENTATION_STEPS, paths.horizon(), paths.config().seed.master);
    out.extend(mc::representation_refinement(&mono(n, "z2")?, &cfg, k)?.records());
    Ok(out)
}

/// Poincaré on the battery, equality on linear coordinates.
pub fn poincare_checks(paths: &PathBundle, k: f64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for f in registry::battery(paths.n()) {
        let r = inequality::poincare_check_with(&*f, paths, CheckOptions::poincare().with_k(k))?;
        out.push(r.record());
        if f.name() == "z" {
            out.push(
                CheckRecord::new("poincare/z/strict_slack", r.slack.value.0, k * r.slack.stderr.0, Some(r.slack.stderr.0), r.strict())
                    .with_note("slack must exceed k stderr"),
            );
        }
    }
    for r in inequality::equality_suite(paths, k)? {
        if r.inequality == "poincare" {
            out.push(r.record());
        }
    }
    Ok(out)
}

/// Sharpness probe constant: strictly below the log-Sobolev constant 2.
pub const LSI_PROBE_CONSTANT: f64 = 1.9;

/// Log-Sobolev on the battery, equality on `exp(λx_1/2)`, and the check that
/// a constant of 1.9 is rejected on that family.
pub fn logsobolev_checks(paths: &PathBundle, k: f64) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for f in registry::battery(paths.n()) {
        out.push(inequality::logsobolev_check_with(&*f, paths, CheckOptions::logsobolev().with_k(k))?.record());
    }
    for r in inequality::equality_suite(paths, k)? {
        if r.inequality == "logsobolev" {
            out.push(r.record());
        }
    }
    for lambda in [0.5, 1.0] {
        let f = registry::ExpLinear::new(paths.n(), lambda);
        let opts = CheckOptions::logsobolev().with_constant(LSI_PROBE_CONSTANT).with_k(k);
        let opts = CheckOptions { bootstrap: false, ..opts };
        let r = inequality::logsobolev_check_with(&f, paths, opts)?;
        out.push(
            CheckRecord::new(
                format!("logsobolev/{}/constant_{LSI_PROBE_CONSTANT}_rejected", f.name()),
                r.lhs.value(),
                r.rhs.value(),
                Some(r.slack.stderr.0),
                !r.passed(),
            )
            .with_note("passes when the smaller constant fails"),
        );
    }
    Ok(out)
}

/// Girsanov diagnostics for `(1 + x_1²)/2`.
pub fn girsanov_checks(config: &SimConfig, k: f64) -> Result<Vec<CheckRecord>> {
    let f = &HPolynomial::constant(config.n, 0.5) + &HPolynomial::monomial(config.n, {
        let mut e = vec![0; 2 * config.n + 1];
        e[0] = 2;
        e
    }, 0.5);
    let opts = GirsanovOptions {
        k_sigma: k,
        ..GirsanovOptions::default()
    };
    let (rep, _) = inequality::girsanov_diagnostics(&f, config, opts)?;
    Ok(rep.records())
}

/// Runs the selected suites and returns their records in suite order.
pub fn run_checks(config: &RunConfig) -> Result<Vec<CheckRecord>> {
    config.validate()?;
    let suites = Suite::expand(&config.suites);
    let k = config.k_sigma();
    let sim_cfg = config.sim_config();
    sim_cfg.validate()?;
    let paths = if suites.iter().any(|s| s.needs_paths()) {
        Some(sim::simulate(&sim_cfg)?)
    } else {
        None
    };
    let mut out = Vec::new();
    for suite in suites {
        let recs = match suite {
            Suite::Algebra => {
                let mut r = algebra_checks(config.n, config.seed)?;
                r.extend(operator_checks(config.n, OPERATOR_MAX_WEIGHT)?);
                r
            }
            Suite::Simulate => {
                let p = paths.as_ref().expect("simulated");
                let mut r = moment_checks(p, k)?;
                r.push(bias_halving(config.n, BIAS_LADDER_PATHS, BIAS_LADDER_STEPS, config.horizon, config.seed)?.record());
                r.extend(reflection_checks(p, k)?);
                r
            }
            Suite::Intertwine => intertwine_checks(paths.as_ref().expect("simulated"), config.seed, k)?,
            Suite::Martingale => martingale_checks(paths.as_ref().expect("simulated"), k)?,
            Suite::Poincare => poincare_checks(paths.as_ref().expect("simulated"), k)?,
            Suite::Logsobolev => logsobolev_checks(paths.as_ref().expect("simulated"), k)?,
            Suite::Girsanov => girsanov_checks(&sim_cfg, k)?,
            Suite::All => unreachable!("expanded"),
        };
        out.extend(recs.into_iter().map(|mut r| {
            r.suite = suite.name().to_string();
            r.seed = config.seed;
            r
        }));
    }
    Ok(out)
}

/// Runs the suites, writes the report and returns the process exit code:
/// 0 when every check passes, 1 when any check fails, 2 on usage or I/O
/// errors. Messages go to stderr.
pub fn run_suite(config: &RunConfig) -> i32 {
    match run_and_write(config) {
        Ok((report, path, diffs)) => {
            eprintln!(
                "{}: {} checks, {} failed; report written to {}",
                config.label(),
                report.summary.total,
                report.summary.failed,
                path.display()
            );
            for r in report.records.iter().filter(|r| !r.passed()) {
                eprintln!("FAIL {}/{}", r.suite, r.name);
            }
            for d in &diffs {
                eprintln!("differs from previous report: {d}");
            }
            if report.all_passed() && diffs.is_empty() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run_and_write(config: &RunConfig) -> Result<(Report, PathBuf, Vec<String>)> {
    config.validate()?;
    let previous = config.compare_to.as_deref().map(report::read_report).transpose()?;
    let records = run_checks(config)?;
    let report = Report::new(config.clone(), records);
    let path = config.output_path();
    report::emit_report(&report.clone().stamped(), config.format, &path)?;
    let diffs = previous.map(|p| compare_to_previous(&report, &p)).unwrap_or_default();
    Ok((report, path, diffs))
}

fn compare_to_previous(report: &Report, previous: &Report) -> Vec<String> {
    // output locations do not change results
    let mut a = report.clone();
    let mut b = previous.clone();
    for c in [&mut a.config, &mut b.config] {
        c.out_dir = None;
        c.compare_to = None;
    }
    report::compare_reports(&a, &b)
}

/// Reads a TOML run configuration.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let c = RunConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.sim_config().record_every, 1024);
        for bad in [
            RunConfig { paths: 0, ..RunConfig::default() },
            RunConfig { n: 0, ..RunConfig::default() },
            RunConfig { horizon: -1.0, ..RunConfig::default() },
            RunConfig { suites: vec![], ..RunConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Usage(_))));
        }
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let c = RunConfig::from_toml("n = 2\nsuites = [\"algebra\"]\n").unwrap();
        assert_eq!((c.n, c.suites.clone()), (2, vec![Suite::Algebra]));
        assert!(RunConfig::from_toml("n = 2\nbogus = 1\n").is_err());
    }

    #[test]
    fn suite_expansion() {
        assert_eq!(Suite::expand(&[Suite::Girsanov, Suite::Algebra, Suite::Girsanov]), vec![Suite::Algebra, Suite::Girsanov]);
        assert_eq!(Suite::expand(&[Suite::All]).len(), 7);
        let c = RunConfig { suites: vec![Suite::All], ..RunConfig::default() };
        assert_eq!(c.label(), "all");
    }

    #[test]
    fn algebra_suite_passes() {
        for n in 1..=2 {
            for r in algebra_checks(n, 3).unwrap() {
                let right = r.name.contains("intertwining_right_field");
                // only functions independent of z satisfy the right-field form
                let z_free = ["x1", "y1", "x1y1"].iter().any(|f| r.name.ends_with(&format!("/{f}")));
                assert_eq!(r.passed(), !right || z_free, "{r:?}");
            }
        }
        for r in operator_checks(1, 6).unwrap() {
            assert_eq!(r.passed(), !r.name.contains("intertwining_right_field"), "{r:?}");
        }
    }

    #[test]
    fn small_run_is_deterministic() {
        let c = RunConfig {
            paths: 2000,
            steps: 64,
            suites: vec![Suite::Poincare, Suite::Martingale],
            ..RunConfig::default()
        };
        let a = run_checks(&c).unwrap();
        let b = run_checks(&c).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.seed == 7 && !r.suite.is_empty()));
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let ok = RunConfig {
            paths: 20_000,
            steps: 16,
            suites: vec![Suite::Poincare],
            out_dir: Some(dir.path().to_path_buf()),
            ..RunConfig::default()
        };
        assert_eq!(run_suite(&ok), 0);
        assert!(dir.path().join("poincare.json").exists());
        let failing = RunConfig { suites: vec![Suite::Algebra], ..ok.clone() };
        assert_eq!(run_suite(&failing), 1);
        let bad = RunConfig { paths: 0, ..ok.clone() };
        assert_eq!(run_suite(&bad), 2);
        let blocked = dir.path().join("file");
        std::fs::write(&blocked, "x").unwrap();
        let unwritable = RunConfig { out_dir: Some(blocked.join("sub")), ..ok };
        assert_eq!(run_suite(&unwritable), 2);
    }
}
