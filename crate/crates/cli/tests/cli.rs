use std::path::Path;
use std::process::{Command, Output};

use torsionlab::config::{self, ExperimentConfig};
use torsionlab::report::{self, FitModel};

fn torsionlab(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_torsionlab"));
    cmd.args(args).current_dir(dir);
    match threads {
        Some(t) => cmd.env("TORSIONLAB_THREADS", t),
        None => cmd.env_remove("TORSIONLAB_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

const GLUING: &str = r#"{
  "kind": "gluing-model", "seed": 3, "cases": 12, "strata": 2,
  "output": { "report": "out/report.json", "csv": "out/cases.csv" }
}"#;

#[test]
fn run_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", GLUING);
    let out = torsionlab(&["run", &cfg], dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["cases"].as_array().unwrap().len(), 12);
    assert_eq!(rep["schemaVersion"], 1);
    let csv = std::fs::read_to_string(dir.path().join("out/cases.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert!(csv.starts_with("id,pass,residual,"));
    let leftovers: Vec<_> = std::fs::read_dir(dir.path().join("out")).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().contains(".tmp")).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn csv_is_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", GLUING);
    let mut seen = Vec::new();
    for threads in [Some("1"), Some("3"), None] {
        let out = torsionlab(&["run", &cfg], dir.path(), threads);
        assert_eq!(out.status.code(), Some(0));
        seen.push(std::fs::read(dir.path().join("out/cases.csv")).unwrap());
        let mut rep: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
        rep.as_object_mut().unwrap().remove("timing");
        seen.push(serde_json::to_vec(&rep).unwrap());
    }
    assert_eq!(seen[0], seen[2]);
    assert_eq!(seen[0], seen[4]);
    assert_eq!(seen[1], seen[3]);
    assert_eq!(seen[1], seen[5]);
}

#[test]
fn assertion_failure_exits_one_with_replayable_case() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{ "kind": "gluing-model", "seed": 3, "cases": 4, "tolerance": 1e-300,
             "output": { "report": "r.json" } }"#,
    );
    let out = torsionlab(&["run", &cfg], dir.path(), None);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().find(|l| l.starts_with("first failure: ")).expect("failure line");
    let case: serde_json::Value = serde_json::from_str(line.trim_start_matches("first failure: ")).unwrap();
    assert_eq!(case["replay"]["seed"], 3);
    assert!(case["replay"]["shapes"].is_array());
    assert!(dir.path().join("r.json").exists());
}

#[test]
fn invalid_configs_exit_two_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("malformed.json", r#"{ "kind": "gluing-model", "seed": "#),
        ("unknown.json", r#"{ "kind": "gluing-model", "seed": 1, "casez": 3, "output": { "csv": "x.csv" } }"#),
        ("kind.json", r#"{ "kind": "nonsense", "seed": 1 }"#),
        ("kappa.json", r#"{ "kind": "glued-fiber", "seed": 1, "kappa": 0.5, "output": { "csv": "x.csv" } }"#),
        ("empty.json", r#"{ "kind": "witten-interval", "seed": 1, "tList": [], "output": { "csv": "x.csv" } }"#),
        ("nested.json", r#"{ "kind": "torsion-oracle", "seed": 1, "output": { "csv": "x.csv", "extra": 1 } }"#),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, text);
        let out = torsionlab(&["run", &cfg], dir.path(), None);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
    }
    assert!(!dir.path().join("x.csv").exists());
    let out = torsionlab(&["run", "missing.json"], dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", GLUING);
    for t in ["0", "many"] {
        assert_eq!(torsionlab(&["run", &cfg], dir.path(), Some(t)).status.code(), Some(2));
    }
    assert_eq!(torsionlab::threads_from_env(Some("4")), Ok(Some(4)));
    assert_eq!(torsionlab::threads_from_env(None), Ok(None));
}

#[test]
fn sweep_rejects_kinds_without_a_swept_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{ "kind": "torsion-oracle", "seed": 1, "cases": 2 }"#);
    assert_eq!(torsionlab(&["sweep", &cfg], dir.path(), None).status.code(), Some(2));
    let cfg = write(dir.path(), "p.json", r#"{ "kind": "gluing-model", "seed": 1, "cases": 2, "variant": "plain" }"#);
    assert_eq!(torsionlab(&["sweep", &cfg], dir.path(), None).status.code(), Some(2));
}

#[test]
fn witten_sweep_has_one_row_per_t_with_constant_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "w.json",
        r#"{ "kind": "witten-interval", "seed": 5, "tList": [6, 8, 10, 12],
             "output": { "csv": "sweep.csv" } }"#,
    );
    let out = torsionlab(&["sweep", &cfg], dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let (t, n) = report::read_columns(&text, "t", "nSmall").unwrap();
    assert_eq!(t, vec![6.0, 8.0, 10.0, 12.0]);
    assert!(n.iter().all(|&v| v == n[0]));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("sweep.plot.json")).unwrap()).unwrap();
    assert_eq!(manifest["data"], "sweep.csv");
    let ys: Vec<&str> = manifest["plots"].as_array().unwrap().iter().map(|p| p["y"].as_str().unwrap()).collect();
    assert_eq!(ys, vec!["lambdaSmallMax", "alphaHatMin"]);

    // the sweep feeds the fit subcommand
    let out = torsionlab(&["fit", "sweep.csv", "--x", "t", "--y", "lambdaSmallMax", "--model", "semi-log"], dir.path(), None);
    assert_eq!(out.status.code(), Some(0));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fit["slope"].as_f64().unwrap() + 1.0).abs() < 0.1);
}

#[test]
fn fit_recovers_exact_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("r,err\n");
    for r in [8.0f64, 16.0, 24.0, 32.0, 40.0] {
        text.push_str(&format!("{r},{:?}\n", 3.0 * r.powf(-0.425)));
    }
    let series = write(dir.path(), "s.csv", &text);
    let out = torsionlab(&["fit", &series, "--x", "r", "--y", "err"], dir.path(), None);
    assert_eq!(out.status.code(), Some(0));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fit["slope"].as_f64().unwrap() + 0.425).abs() < 1e-12);
    assert!(fit["stderr"].as_f64().unwrap() < 1e-12);
}

#[test]
fn fit_rejects_bad_series() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text, y) in [
        ("neg.csv", "x,y\n1,1\n2,-1\n3,2\n", "y"),
        ("short.csv", "x,y\n1,1\n2,2\n", "y"),
        ("col.csv", "x,y\n1,1\n2,2\n3,3\n", "z"),
        ("nan.csv", "x,y\n1,1\n2,abc\n3,3\n", "y"),
    ] {
        let series = write(dir.path(), name, text);
        let out = torsionlab(&["fit", &series, "--x", "x", "--y", y], dir.path(), None);
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
}

#[test]
fn defaults_and_hash_are_canonical() {
    let a = config::parse(r#"{ "kind": "glued-fiber", "seed": 1 }"#).unwrap();
    let b = config::parse(r#"{ "seed": 1, "kind": "glued-fiber", "rList": [8, 16, 24, 32, 40], "kappa": 0.3 }"#).unwrap();
    assert_eq!(a.hash(), b.hash());
    let ExperimentConfig::GluedFiber(g) = &a else { panic!("wrong kind") };
    assert_eq!(g.cells_per_unit, 200);
    let c = config::parse(r#"{ "kind": "glued-fiber", "seed": 2 }"#).unwrap();
    assert_ne!(a.hash(), c.hash());
    assert!(config::parse(r#"{ "kind": "glued-fiber", "seed": 1, "topology": "circle", "smallComplex": true }"#).is_err());
}

#[test]
fn fit_checks_compare_against_expected_slope() {
    let x = [1.0, 2.0, 4.0, 8.0];
    let y: Vec<f64> = x.iter().map(|v: &f64| v.sqrt()).collect();
    let ok = report::fit_check("sqrt", &x, &y, FitModel::LogLog, Some((0.5, 0.1)));
    assert!(ok.pass && (ok.slope - 0.5).abs() < 1e-12);
    assert!(ok.ci95[0] <= ok.slope && ok.slope <= ok.ci95[1]);
    let bad = report::fit_check("sqrt", &x, &y, FitModel::LogLog, Some((1.0, 0.1)));
    assert!(!bad.pass);
    let short = report::fit_check("two", &x[..2], &y[..2], FitModel::LogLog, Some((0.5, 0.1)));
    assert!(!short.pass);
}
