use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn verify(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_verify"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HLAB_OUTPUT_DIR")
        .output()
        .expect("spawn verify");
    (o.status.code().expect("exit code"), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn only_file(dir: &Path) -> std::path::PathBuf {
    let files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 1, "{files:?}");
    files.into_iter().next().unwrap()
}

fn failing_names(report: &Value) -> Vec<String> {
    report["records"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["verdict"] != "pass")
        .map(|r| r["name"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn algebra_fails_only_on_right_field_intertwining() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = verify(&["algebra", "--n", "2", "--seed", "7"], dir.path());
    assert_eq!(code, 1);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(only_file(dir.path())).unwrap()).unwrap();
    let failing = failing_names(&report);
    assert!(!failing.is_empty());
    assert!(failing.iter().all(|n| n.contains("intertwining_right_field")), "{failing:?}");
    assert_eq!(report["summary"]["failed"].as_u64().unwrap() as usize, failing.len());
}

#[test]
fn zero_paths_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = verify(&["poincare", "--paths", "0"], dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("error"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(verify(&["nonsense"], dir.path()).0, 2);
    assert_eq!(verify(&["algebra", "--n", "x"], dir.path()).0, 2);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let (code, _) = verify(&["algebra", "--n", "1"], &blocker.join("sub"));
    assert_eq!(code, 2);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 2\nseed = 3\nsuites = [\"algebra\"]\nformat = \"csv\"\n").unwrap();
    let out = dir.path().join("out");
    let (code, _) = verify(&["--config", cfg.to_str().unwrap(), "--seed", "11"], &out);
    assert_eq!(code, 1);
    let file = only_file(&out);
    assert_eq!(file.extension().unwrap(), "csv");
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), hlab::report::CSV_HEADER);
    assert!(lines.all(|l| l.starts_with("algebra,") && l.contains(",11,")));

    std::fs::write(&cfg, "n = 1\ncolour = \"red\"\n").unwrap();
    assert_eq!(verify(&["--config", cfg.to_str().unwrap()], &out).0, 2);
}

#[test]
fn compare_to_detects_changes() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let args = ["poincare", "--paths", "2000", "--steps", "16", "--seed", "5"];
    verify(&args, &first);
    let previous = only_file(&first);
    let prev = previous.to_str().unwrap();

    let mut same: Vec<&str> = args.to_vec();
    same.extend(["--compare-to", prev]);
    let (code, err) = verify(&same, &dir.path().join("b"));
    assert!(!err.contains("differs"), "{err}");
    // the verdicts at this size are not the point; only the comparison is
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&previous).unwrap()).unwrap();
    assert_eq!(code, if failing_names(&report).is_empty() { 0 } else { 1 });

    let other = ["poincare", "--paths", "2000", "--steps", "16", "--seed", "6", "--compare-to", prev];
    let (code, err) = verify(&other, &dir.path().join("c"));
    assert_eq!(code, 1);
    assert!(err.contains("differs from previous report"), "{err}");

    let missing = dir.path().join("missing.json");
    let bad = ["poincare", "--paths", "2000", "--steps", "16", "--compare-to", missing.to_str().unwrap()];
    assert_eq!(verify(&bad, &dir.path().join("d")).0, 2);
}

#[test]
fn logsobolev_default_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) =
        verify(&["logsobolev", "--n", "1", "--paths", "100000", "--steps", "4096", "--seed", "7"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert!(only_file(dir.path()).to_str().unwrap().ends_with(".json"));
}
