//! Acceptance criteria at full scale. Each criterion prints one
//! `[PASS]`/`[FAIL]` line. Criteria that fail for mathematical reasons are
//! listed in `KNOWN_FAILURES`; for those the test pins the failure mode
//! instead of the pass, so any change in behaviour is caught.

use std::io::Write;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use hlab::group::registry::{self, ExpLinear};
use hlab::group::FieldId;
use hlab::inequality::{self, CheckOptions, GirsanovOptions, Relation};
use hlab::mc::{self, Probe, TestFn};
use hlab::poly::HPolynomial;
use hlab::report::{self, CheckRecord, Report};
use hlab::sim::{self, PathBundle, SimConfig};
use hlab::suite::{self, RunConfig, Suite};

// Pinned tolerances and sizes.
const K: f64 = 3.0;
const EXACT_TOL: f64 = 1e-12;
const TERMINAL_TOL: f64 = 1e-10;
const BIAS_RATIO: f64 = 1.5;
const REPRESENTATION_RATIO: f64 = 1.5;
const GIRSANOV_RATIO: f64 = 1.4;
const LSI_CONSTANT: f64 = 2.0;
const LSI_PROBE: f64 = 1.9;
const PATHS: usize = 100_000;
const STEPS: usize = 4096;
const SEED: u64 = 7;
const BUDGET_ALGEBRA: Duration = Duration::from_secs(1);
const BUDGET_OPERATORS: Duration = Duration::from_secs(10);
const BUDGET_MC: Duration = Duration::from_secs(120);

/// Criteria whose statements do not hold as written; see the decisions log.
const KNOWN_FAILURES: [u32; 3] = [2, 5, 6];

static HEAVY: Mutex<()> = Mutex::new(());
static BUNDLE: OnceLock<(PathBundle, Duration)> = OnceLock::new();

fn serial() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn config() -> SimConfig {
    SimConfig::new(1, PATHS, STEPS, 1.0, SEED).recording_every(STEPS / 4)
}

/// The shared n = 1 bundle and the time it took to build.
fn bundle() -> &'static (PathBundle, Duration) {
    BUNDLE.get_or_init(|| {
        let t = Instant::now();
        let b = sim::simulate(&config()).unwrap();
        (b, t.elapsed())
    })
}

fn verdict(criterion: u32, ok: bool, detail: &str) {
    // straight to the stderr handle so the line survives libtest capture
    let line = format!("[{}] criterion {criterion}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    if KNOWN_FAILURES.contains(&criterion) {
        assert!(!ok, "criterion {criterion} now passes; update KNOWN_FAILURES");
    } else {
        assert!(ok, "criterion {criterion} failed: {detail}");
    }
}

fn failing(records: &[CheckRecord]) -> Vec<String> {
    records.iter().filter(|r| !r.passed()).map(|r| r.name.clone()).collect()
}

fn poly(name: &str) -> HPolynomial {
    registry::monomial(name, 1).unwrap()
}

#[test]
fn criterion_01_exact_algebra() {
    let _g = serial();
    let t = Instant::now();
    let mut recs = Vec::new();
    for n in 1..=3 {
        recs.extend(suite::algebra_checks(n, SEED).unwrap());
    }
    let elapsed = t.elapsed();
    let group: Vec<&CheckRecord> = recs
        .iter()
        .filter(|r| ["mirror_automorphism", "mirror_involution", "associativity", "bracket_XY_Z"].iter().any(|k| r.name.ends_with(k)))
        .collect();
    assert_eq!(group.len(), 12);
    let worst = group.iter().map(|r| r.lhs.unwrap().0).fold(0.0, f64::max);
    let ok = group.iter().all(|r| r.passed() && r.rhs.unwrap().0 == EXACT_TOL) && elapsed < BUDGET_ALGEBRA;
    verdict(1, ok, &format!("A automorphism, A²=I, associativity, [X_i,Y_j]=δ_ij Z at 100 points, n=1..3; worst {worst:.2e}; {elapsed:.2?}"));
}

#[test]
fn criterion_02_exact_operators() {
    let _g = serial();
    let t = Instant::now();
    let mut recs = Vec::new();
    for n in 1..=2 {
        recs.extend(suite::operator_checks(n, 8).unwrap());
    }
    let elapsed = t.elapsed();
    let fails = failing(&recs);
    let holds = |k: &str| recs.iter().filter(|r| r.name.ends_with(k)).all(|r| r.passed());
    let ok = fails.is_empty() && elapsed < BUDGET_OPERATORS;
    verdict(
        2,
        ok,
        &format!(
            "weight<=8, n=1,2: right-field intertwining {}, left-field intertwining {}, [L,X̂]=[L,Ŷ]=0 {}, semigroup law {}, mirror commutation {}, left translation {}; {elapsed:.2?}",
            holds("intertwining_right_field"),
            holds("intertwining_left_field"),
            holds("generator_commutes_right_fields"),
            holds("semigroup_law"),
            holds("mirror_commutation"),
            holds("left_translation_commutation"),
        ),
    );
    // Failure mode: only the right-field form of the intertwining relation.
    assert_eq!(fails, ["n=1/w<=8/intertwining_right_field", "n=2/w<=8/intertwining_right_field"]);
    assert!(elapsed < BUDGET_OPERATORS);
    // P = z is the smallest witness: mirror(X_1 z) + X̂_1(mirror z) = y_1.
    let z = poly("z");
    let a = hlab::poly::mirror(&hlab::poly::poly_apply_field(FieldId::x(1), &z).unwrap());
    let b = hlab::poly::poly_apply_field(FieldId::xhat(1), &hlab::poly::mirror(&z)).unwrap();
    assert_eq!(&a + &b, poly("y1"));
}

#[test]
fn criterion_03_simulator_calibration() {
    let _g = serial();
    let t = Instant::now();
    let (paths, build) = bundle();
    let recs = suite::moment_checks(paths, K).unwrap();
    let z2 = recs.iter().find(|r| r.name == "moment/z^2").expect("z² moment");
    let ladder = suite::bias_halving(1, suite::BIAS_LADDER_PATHS, suite::BIAS_LADDER_STEPS, 1.0, SEED).unwrap();
    let elapsed = t.elapsed() + *build;
    let z2_ok = (z2.lhs.unwrap().0 - 0.25).abs() <= K * z2.stderr.unwrap().0 + suite::DISCRETIZATION_C / STEPS as f64;
    let ok = failing(&recs).is_empty() && z2_ok && ladder.passed && ladder.ratio.0 >= BIAS_RATIO && elapsed < BUDGET_MC;
    verdict(
        3,
        ok,
        &format!(
            "{} monomials of weight<=4 within 3 se + Δt; E[(z/2)²]={:.5}±{:.5}; bias ratio {:.3} (K={}→{}, {} paths); {elapsed:.2?}",
            recs.len(),
            z2.lhs.unwrap().0,
            z2.stderr.unwrap().0,
            ladder.ratio.0,
            ladder.coarse_steps,
            2 * ladder.coarse_steps,
            suite::BIAS_LADDER_PATHS
        ),
    );
}

#[test]
fn criterion_04_reflection() {
    let _g = serial();
    let (paths, _) = bundle();
    let recs = suite::reflection_checks(paths, K).unwrap();
    let gap = recs[0].lhs.unwrap().0;
    let ok = failing(&recs).is_empty() && gap <= EXACT_TOL && recs.len() == 13;
    verdict(4, ok, &format!("max |z(−b,−w) − z(b,w)| = {gap:e} over all steps; 12 moment matches within 3 se"));
}

#[test]
fn criterion_05_martingales() {
    let _g = serial();
    let (paths, _) = bundle();
    let times = [0.0, 0.25, 0.5, 0.75];
    let mut broken = Vec::new();
    let mut right_ok = true;
    for f in ["z2", "x1y1", "x1z"] {
        let p = poly(f);
        for field in [FieldId::x(1), FieldId::y(1), FieldId::xhat(1), FieldId::yhat(1)] {
            let rep = mc::martingale_test(TestFn::Poly(&p), field, &times, &Probe::standard(), paths, K, None).unwrap();
            if field.kind.is_right_invariant() {
                right_ok &= rep.passed();
            } else if !rep.passed() {
                broken.push(format!("{f}/{field}"));
            }
        }
    }
    let ok = broken.is_empty();
    verdict(
        5,
        ok,
        &format!("left fields X1,Y1: not martingales for {broken:?}; right fields X̂1,Ŷ1 pass for all three: {right_ok}"),
    );
    assert_eq!(broken, ["z2/X1", "z2/Y1", "x1z/Y1"]);
    assert!(right_ok);
}

#[test]
fn criterion_06_representation() {
    let _g = serial();
    let cfg = SimConfig::new(1, 10_000, 1024, 1.0, SEED);
    let r = mc::representation_refinement(&poly("z2"), &cfg, K).unwrap();
    let ok = r.passed && r.ratio.0 >= REPRESENTATION_RATIO;
    verdict(
        6,
        ok,
        &format!(
            "z², 10^4 paths: RMS {:.4e} (1024) → {:.4e} (2048), ratio {:.3} vs {REPRESENTATION_RATIO}; mean residual ok: {} {}",
            r.coarse.rms.0, r.fine.rms.0, r.ratio.0, r.coarse.mean_ok, r.fine.mean_ok
        ),
    );
    // Failure mode: strong order 1/2, ratio ≈ √2, while the mean stays unbiased.
    assert!((r.ratio.0 - std::f64::consts::SQRT_2).abs() < 0.05, "{}", r.ratio.0);
    assert!(r.coarse.mean_ok && r.fine.mean_ok);
}

#[test]
fn criterion_07_poincare() {
    let _g = serial();
    let t = Instant::now();
    let (paths, build) = bundle();
    let recs = suite::poincare_checks(paths, K).unwrap();
    let x = registry::coordinate(1, registry::Coord::X(1));
    let y = registry::coordinate(1, registry::Coord::Y(1));
    let eq = [&x, &y].map(|f| inequality::poincare_check_with(f, paths, CheckOptions::poincare().equality()).unwrap());
    let z = inequality::poincare_check(&registry::coordinate(1, registry::Coord::Z), paths).unwrap();
    let elapsed = t.elapsed() + *build;
    let dt = 1.0 / STEPS as f64;
    let z_ok = z.passed()
        && z.strict()
        && (z.lhs.value() - 0.25).abs() <= K * z.lhs.stderr() + dt
        && (z.rhs.value() - 0.5).abs() <= K * z.rhs.stderr() + dt;
    let ok = failing(&recs).is_empty()
        && eq.iter().all(|r| r.passed() && r.relation == Relation::Equal)
        && z_ok
        && elapsed < BUDGET_MC;
    verdict(
        7,
        ok,
        &format!(
            "battery passes; equality x1 {:.4}/{:.4}, y1 {:.4}/{:.4}; z: {:.4} vs {:.4}, slack {:.4} > 3×{:.4}; {elapsed:.2?}",
            eq[0].lhs.value(),
            eq[0].rhs.value(),
            eq[1].lhs.value(),
            eq[1].rhs.value(),
            z.lhs.value(),
            z.rhs.value(),
            z.slack.value.0,
            z.slack.stderr.0
        ),
    );
}

#[test]
fn criterion_08_logsobolev() {
    let _g = serial();
    let (paths, _) = bundle();
    let mut ok = true;
    let mut detail = Vec::new();
    for f in registry::battery(1) {
        let r = inequality::logsobolev_check(&*f, paths).unwrap();
        ok &= r.passed() && r.constant.0 == LSI_CONSTANT;
    }
    for lambda in [0.5, 1.0] {
        let f = ExpLinear::new(1, lambda);
        let want = inequality::lsi_extremal_value(lambda);
        let r = inequality::logsobolev_check_with(&f, paths, CheckOptions::logsobolev().equality()).unwrap();
        let near = (r.lhs.value() - want).abs() <= K * r.lhs.stderr() && (r.rhs.value() - want).abs() <= K * r.rhs.stderr();
        let probe = CheckOptions { bootstrap: false, ..CheckOptions::logsobolev().with_constant(LSI_PROBE) };
        let weaker = inequality::logsobolev_check_with(&f, paths, probe).unwrap();
        ok &= r.passed() && near && !weaker.passed();
        detail.push(format!(
            "λ={lambda}: {:.4} vs {:.4} (closed form {want:.4}), constant {LSI_PROBE} rejected: {}",
            r.lhs.value(),
            r.rhs.value(),
            !weaker.passed()
        ));
    }
    verdict(8, ok, &format!("battery passes; {}", detail.join("; ")));
}

#[test]
fn criterion_09_girsanov() {
    let _g = serial();
    let f = &HPolynomial::constant(1, 0.5) + &HPolynomial::monomial(1, vec![2, 0, 0], 0.5);
    let (rep, _) = inequality::girsanov_diagnostics(&f, &config(), GirsanovOptions::default()).unwrap();
    let nu = rep.checks_with("nu_");
    let entropy = rep.check("entropy_identity").unwrap();
    let ratio = rep.refinement_ratio.unwrap().0;
    let ok = ratio >= GIRSANOV_RATIO
        && nu.iter().all(|c| c.passed)
        && entropy.passed
        && rep.terminal_gap.0 <= TERMINAL_TOL
        && rep.check("weights_mean").unwrap().passed;
    verdict(
        9,
        ok,
        &format!(
            "residual RMS {:.4e} → {:.4e}, ratio {ratio:.4}; {} ν-checks pass: {}; entropy {:.5} vs {:.5}; terminal gap {:e}",
            rep.coarse_residual_rms.unwrap().0,
            rep.residual_rms.0,
            nu.len(),
            nu.iter().all(|c| c.passed),
            entropy.lhs.0,
            entropy.rhs.0,
            rep.terminal_gap.0
        ),
    );
}

#[test]
fn criterion_10_reproducibility() {
    let _g = serial();
    let cfg = RunConfig {
        paths: 2_000,
        steps: 64,
        suites: vec![Suite::All],
        ..RunConfig::default()
    };
    let reports: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let recs = pool.install(|| suite::run_checks(&cfg)).unwrap();
            report::to_json(&Report::new(cfg.clone(), recs)).unwrap()
        })
        .collect();
    let ok = reports.windows(2).all(|w| w[0] == w[1]);
    verdict(10, ok, &format!("JSON reports of {} bytes identical across 1, 4, 8 threads", reports[0].len()));
}
