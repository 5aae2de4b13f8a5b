//! Report records and their JSON/CSV serialization.
//!
//! Floating-point values are written with 17 significant digits, which is
//! enough for every `f64` to survive a write/read cycle bit for bit.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;
#[cfg(test)]
use crate::error::Error;
use crate::suite::RunConfig;

/// An `f64` serialized with 17 significant digits. Non-finite values are
/// written as `null` and read back as NaN.
#[derive(Clone, Copy, Debug, Default, PartialOrd)]
pub struct Num(pub f64);

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits() || (self.0.is_nan() && other.0.is_nan())
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_finite() {
            write!(f, "{:.16e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let number = serde_json::Number::from_str(&self.to_string()).map_err(serde::ser::Error::custom)?;
        number.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Option<serde_json::Number> = Option::deserialize(d)?;
        match v {
            None => Ok(Num(f64::NAN)),
            Some(num) => num
                .to_string()
                .parse::<f64>()
                .map(Num)
                .map_err(serde::de::Error::custom),
        }
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// One check: the two sides being compared, the standard error that scales
/// the tolerance (absent for exact checks) and the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub suite: String,
    pub name: String,
    pub lhs: Option<Num>,
    pub rhs: Option<Num>,
    pub stderr: Option<Num>,
    pub verdict: Verdict,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, stderr: Option<f64>, ok: bool) -> Self {
        Self {
            suite: String::new(),
            name: name.into(),
            lhs: Some(Num(lhs)),
            rhs: Some(Num(rhs)),
            stderr: stderr.map(Num),
            verdict: Verdict::from_bool(ok),
            seed: 0,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

impl Summary {
    pub fn of(records: &[CheckRecord]) -> Self {
        let passed = records.iter().filter(|r| r.passed()).count();
        Self {
            total: records.len(),
            passed,
            failed: records.len() - passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Seconds since the Unix epoch; omitted in comparison mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub config: RunConfig,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    pub fn new(config: RunConfig, records: Vec<CheckRecord>) -> Self {
        let summary = Summary::of(&records);
        Self {
            timestamp: None,
            config,
            records,
            summary,
        }
    }

    pub fn stamped(mut self) -> Self {
        self.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        self
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

pub fn to_json(report: &Report) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub const CSV_HEADER: &str = "suite,name,lhs,rhs,stderr,verdict,seed,note";

pub fn to_csv(report: &Report) -> String {
    let opt = |v: &Option<Num>| v.map(|n| n.to_string()).unwrap_or_default();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header: Vec<&str> = CSV_HEADER.split(',').collect();
    // writing into a Vec cannot fail
    w.write_record(&header).expect("in-memory csv");
    for r in &report.records {
        let row = [
            r.suite.clone(),
            r.name.clone(),
            opt(&r.lhs),
            opt(&r.rhs),
            opt(&r.stderr),
            r.verdict.to_string(),
            r.seed.to_string(),
            r.note.clone().unwrap_or_default(),
        ];
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 fields")
}

/// Writes `report` to `path` in the given format.
pub fn emit_report(report: &Report, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Json => to_json(report)?,
        Format::Csv => to_csv(report),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Differences between two reports, ignoring timestamps.
pub fn compare_reports(a: &Report, b: &Report) -> Vec<String> {
    let mut diffs = Vec::new();
    if a.config != b.config {
        diffs.push("config differs".to_string());
    }
    if a.records.len() != b.records.len() {
        diffs.push(format!(
            "record count differs: {} vs {}",
            a.records.len(),
            b.records.len()
        ));
    }
    for (ra, rb) in a.records.iter().zip(&b.records) {
        if ra != rb {
            diffs.push(format!("{}/{} differs", ra.suite, ra.name));
        }
    }
    diffs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = CheckRecord::new("poincare/z", 0.2513, 0.4998, Some(0.0021), true);
        r.suite = "poincare".into();
        r.seed = 7;
        let mut e = CheckRecord::new("exact", 1.0 / 3.0, 1e-12, None, false).with_note("a, \"quoted\" note");
        e.suite = "algebra".into();
        Report::new(RunConfig::default(), vec![r, e])
    }

    #[test]
    fn num_format_has_17_digits() {
        assert_eq!(Num(0.25).to_string(), "2.5000000000000000e-1");
        assert_eq!(serde_json::to_string(&Num(-1.0)).unwrap(), "-1.0000000000000000e+0");
        assert_eq!(serde_json::to_string(&Num(f64::NAN)).unwrap(), "null");
        for v in [0.1, 1.0 / 3.0, -2.2250738585072014e-308, 6.02214076e23, 0.0] {
            let back: Num = serde_json::from_str(&serde_json::to_string(&Num(v)).unwrap()).unwrap();
            assert_eq!(back.0.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let rep = sample().stamped();
        let text = to_json(&rep).unwrap();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
        assert!(compare_reports(&back, &rep).is_empty());
    }

    #[test]
    fn empty_report_has_summary() {
        let rep = Report::new(RunConfig::default(), vec![]);
        let text = to_json(&rep).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["summary"]["total"], 0);
        assert_eq!(to_csv(&rep), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_rows() {
        let csv = to_csv(&sample());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("poincare,poincare/z,2.5130000000000002e-1,"));
        assert!(lines[1].contains(",pass,7,"));
        assert!(lines[2].ends_with("\"a, \"\"quoted\"\" note\""));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_report(&sample(), Format::Json, &blocker.join("sub/report.json"));
        assert!(matches!(err, Err(Error::Io(_))));
    }
}
