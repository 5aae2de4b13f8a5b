use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hlab::report::Format;
use hlab::suite::{self, RunConfig, Suite};

/// Verification suites for Brownian motion on the Heisenberg group.
#[derive(Parser, Debug)]
#[command(name = "verify", version)]
struct Cli {
    /// Suites to run (repeatable); `--suite` adds more.
    #[arg(value_enum)]
    suite: Vec<Suite>,
    #[arg(long = "suite", value_enum)]
    extra: Vec<Suite>,
    /// Dimension parameter of H_n.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to $HLAB_OUTPUT_DIR, then ./reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Multiplier on the 3-standard-error rule.
    #[arg(long)]
    tolerance_scale: Option<f64>,
    /// Previous JSON report that this run must reproduce.
    #[arg(long)]
    compare_to: Option<PathBuf>,
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

fn build_config(cli: Cli) -> hlab::Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => suite::load_config(p)?,
        None => RunConfig::default(),
    };
    let mut suites = cli.suite;
    suites.extend(cli.extra);
    if !suites.is_empty() {
        c.suites = suites;
    }
    c.n = cli.n.unwrap_or(c.n);
    c.paths = cli.paths.unwrap_or(c.paths);
    c.steps = cli.steps.unwrap_or(c.steps);
    c.horizon = cli.horizon.unwrap_or(c.horizon);
    c.seed = cli.seed.unwrap_or(c.seed);
    c.format = cli.format.unwrap_or(c.format);
    c.tolerance_scale = cli.tolerance_scale.unwrap_or(c.tolerance_scale);
    c.out_dir = cli.out.or(c.out_dir);
    c.compare_to = cli.compare_to.or(c.compare_to);
    Ok(c)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 || rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            eprintln!("error: invalid thread count {t}");
            return ExitCode::from(2);
        }
    }
    match build_config(cli) {
        Ok(c) => ExitCode::from(suite::run_suite(&c) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
