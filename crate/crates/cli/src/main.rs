use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use torsionlab::config::{self, ExperimentConfig};
use torsionlab::report::{self, FitModel, RunReport};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "torsionlab", version, about = "Torsion-form and gluing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite; writes the report and per-case CSV.
    Run { config: PathBuf },
    /// Run a suite over its swept parameter; writes one CSV row per value.
    Sweep { config: PathBuf },
    /// Least-squares line through two CSV columns in log coordinates.
    Fit {
        series: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, value_enum, default_value_t = Model::LogLog)]
        model: Model,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    LogLog,
    SemiLog,
}

fn config_error(msgs: &[String]) -> ExitCode {
    for m in msgs {
        eprintln!("config error: {m}");
    }
    ExitCode::from(EXIT_CONFIG)
}

fn load(path: &Path) -> Result<ExperimentConfig, Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
    config::parse(&text)
}

fn summarize(rep: &RunReport) {
    let passed = rep.cases.iter().filter(|c| c.pass).count();
    println!("{}: {passed}/{} cases pass, config {}", rep.kind, rep.cases.len(), &rep.config_hash[..12]);
    for f in &rep.fits {
        let status = if f.pass { "ok" } else { "FAIL" };
        match (f.expected, f.tolerance) {
            (Some(e), Some(t)) => println!("  fit {}: slope {:.4} ± {:.4} (expected {e} ± {t}) {status}", f.name, f.slope, f.stderr),
            _ => println!("  fit {}: slope {:.4} ± {:.4} {status}", f.name, f.slope, f.stderr),
        }
    }
    for c in &rep.checks {
        println!("  check {}: {:.6} {} {}", c.name, c.value, c.bound, if c.pass { "ok" } else { "FAIL" });
    }
}

fn finish(rep: &RunReport, csv: Vec<u8>, cfg: &ExperimentConfig) -> ExitCode {
    let out = cfg.output();
    let json = serde_json::to_vec_pretty(rep).expect("report serializes");
    if let Some(p) = &out.csv {
        let text = String::from_utf8_lossy(&csv);
        let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').collect();
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let manifest = report::plot_manifest(&rep.kind, &name, &header);
        let manifest_json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        for (path, bytes) in [(p.clone(), csv.as_slice()), (report::manifest_path(p), manifest_json.as_slice())] {
            if let Err(e) = report::write_atomic(&path, bytes) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_FAIL);
            }
        }
    }
    if let Some(p) = &out.report {
        if let Err(e) = report::write_atomic(p, &json) {
            eprintln!("cannot write {}: {e}", p.display());
            return ExitCode::from(EXIT_FAIL);
        }
    }
    summarize(rep);
    if rep.pass {
        ExitCode::SUCCESS
    } else {
        if let Some(first) = rep.first_failure() {
            eprintln!("first failure: {}", serde_json::to_string(&first).expect("failure serializes"));
        }
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match torsionlab::threads_from_env(std::env::var("TORSIONLAB_THREADS").ok().as_deref()) {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("thread pool: {e}");
                return ExitCode::from(EXIT_FAIL);
            }
        }
        Ok(None) => {}
        Err(e) => return config_error(&[e]),
    }
    match cli.command {
        Command::Run { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            let rep = torsionlab::execute(&cfg);
            let csv = report::cases_csv(&rep.cases).expect("csv encodes");
            finish(&rep, csv, &cfg)
        }
        Command::Sweep { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            if cfg.swept().is_none() {
                return config_error(&[format!("kind {} has no swept parameter", cfg.kind())]);
            }
            let rep = torsionlab::execute(&cfg);
            let csv = report::sweep_csv(&rep.sweep).expect("csv encodes");
            if cfg.output().csv.is_none() {
                print!("{}", String::from_utf8_lossy(&csv));
            }
            finish(&rep, csv, &cfg)
        }
        Command::Fit { series, x, y, model } => {
            let text = match std::fs::read_to_string(&series) {
                Ok(t) => t,
                Err(e) => return config_error(&[format!("{}: {e}", series.display())]),
            };
            let (xs, ys) = match report::read_columns(&text, &x, &y) {
                Ok(v) => v,
                Err(e) => return config_error(&[e]),
            };
            let model = match model {
                Model::LogLog => FitModel::LogLog,
                Model::SemiLog => FitModel::SemiLog,
            };
            match report::fit_series(&xs, &ys, model) {
                Ok(f) => {
                    let out = serde_json::json!({
                        "model": model,
                        "slope": f.slope,
                        "intercept": f.intercept,
                        "stderr": f.slope_stderr,
                        "ci95": report::ci95(&f),
                        "rSquared": f.r_squared,
                        "n": f.n,
                    });
                    println!("{}", serde_json::to_string_pretty(&out).expect("fit serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => config_error(&[e]),
            }
        }
    }
}
