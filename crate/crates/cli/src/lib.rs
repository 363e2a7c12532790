//! Configuration-driven experiment runner for `torsionlab-core`.

pub mod config;
pub mod report;
pub mod suites;

use std::time::Instant;

use config::ExperimentConfig;
use report::{RunReport, Timing, SCHEMA_VERSION};

/// Runs the configured suite and assembles its report.
pub fn execute(cfg: &ExperimentConfig) -> RunReport {
    let start = Instant::now();
    let out = suites::run(cfg);
    let failures = out.cases.iter().filter(|c| !c.pass).count()
        + out.fits.iter().filter(|f| !f.pass).count()
        + out.checks.iter().filter(|c| !c.pass).count();
    RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind().to_string(),
        seed: cfg.seed(),
        config_hash: cfg.hash(),
        pass: failures == 0,
        failures,
        cases: out.cases,
        sweep: out.sweep,
        fits: out.fits,
        checks: out.checks,
        timing: Timing { wall_seconds: start.elapsed().as_secs_f64() },
    }
}

/// Worker count from `TORSIONLAB_THREADS`; `None` leaves the default.
pub fn threads_from_env(value: Option<&str>) -> Result<Option<usize>, String> {
    match value {
        None => Ok(None),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("TORSIONLAB_THREADS must be a positive integer, got {s:?}")),
        },
    }
}
