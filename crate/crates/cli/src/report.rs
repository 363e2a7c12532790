//! Run reports, CSV series and atomic artifact writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use torsionlab_core::fit::{self, LineFit};

pub const SCHEMA_VERSION: u32 = 1;

/// One verified case. `values` become CSV columns in key order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseResult {
    pub id: String,
    pub pass: bool,
    pub residual: f64,
    pub values: BTreeMap<String, f64>,
    /// Inputs needed to replay the case.
    pub replay: serde_json::Value,
}

/// A scalar assertion that is not tied to a single case.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `log y` against `log x`.
    LogLog,
    /// `log y` against `x`.
    SemiLog,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitResult {
    pub name: String,
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// 95% interval from the Student t quantile with `n − 2` degrees of freedom.
    pub ci95: [f64; 2],
    pub n: usize,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

pub fn fit_series(x: &[f64], y: &[f64], model: FitModel) -> Result<LineFit, String> {
    if x.len() < 3 {
        return Err(format!("a scaling fit needs at least 3 points, got {}", x.len()));
    }
    if let Some(v) = y.iter().find(|v| !(**v > 0.0)) {
        return Err(format!("ordinates must be positive, got {v}"));
    }
    match model {
        FitModel::LogLog => fit::log_log_fit(x, y),
        FitModel::SemiLog => fit::semi_log_fit(x, y),
    }
    .map_err(|e| e.to_string())
}

pub fn ci95(f: &LineFit) -> [f64; 2] {
    let q = if f.n > 2 {
        StudentsT::new(0.0, 1.0, (f.n - 2) as f64).map_or(f64::NAN, |d| d.inverse_cdf(0.975))
    } else {
        f64::NAN
    };
    [f.slope - q * f.slope_stderr, f.slope + q * f.slope_stderr]
}

/// Fits and compares the slope with `expected ± tolerance`.
pub fn fit_check(name: &str, x: &[f64], y: &[f64], model: FitModel, expected: Option<(f64, f64)>) -> FitResult {
    match fit_series(x, y, model) {
        Ok(f) => FitResult {
            name: name.into(),
            model,
            slope: f.slope,
            intercept: f.intercept,
            stderr: f.slope_stderr,
            ci95: ci95(&f),
            n: f.n,
            expected: expected.map(|e| e.0),
            tolerance: expected.map(|e| e.1),
            pass: expected.is_none_or(|(e, tol)| (f.slope - e).abs() <= tol),
        },
        Err(_) => FitResult {
            name: name.into(),
            model,
            slope: f64::NAN,
            intercept: f64::NAN,
            stderr: f64::NAN,
            ci95: [f64::NAN; 2],
            n: x.len(),
            expected: expected.map(|e| e.0),
            tolerance: expected.map(|e| e.1),
            pass: expected.is_none(),
        },
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub pass: bool,
    pub failures: usize,
    pub cases: Vec<CaseResult>,
    /// One row per swept parameter value.
    pub sweep: Vec<BTreeMap<String, f64>>,
    pub fits: Vec<FitResult>,
    pub checks: Vec<Check>,
    /// The only nondeterministic field.
    pub timing: Timing,
}

impl RunReport {
    pub fn first_failure(&self) -> Option<serde_json::Value> {
        if let Some(c) = self.cases.iter().find(|c| !c.pass) {
            return serde_json::to_value(c).ok();
        }
        if let Some(f) = self.fits.iter().find(|f| !f.pass) {
            return serde_json::to_value(f).ok();
        }
        self.checks.iter().find(|c| !c.pass).and_then(|c| serde_json::to_value(c).ok())
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip form
    format!("{v:?}")
}

/// Per-case CSV: `id,pass,residual` followed by the value columns in key order.
pub fn cases_csv(cases: &[CaseResult]) -> Result<Vec<u8>, csv::Error> {
    let keys: Vec<String> = cases.first().map(|c| c.values.keys().cloned().collect()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "pass".into(), "residual".into()];
    header.extend(keys.iter().cloned());
    w.write_record(&header)?;
    for c in cases {
        let mut row = vec![c.id.clone(), c.pass.to_string(), fmt_f64(c.residual)];
        row.extend(keys.iter().map(|k| c.values.get(k).map_or(String::new(), |v| fmt_f64(*v))));
        w.write_record(&row)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

/// Sweep CSV: one row per parameter value, columns in key order.
pub fn sweep_csv(rows: &[BTreeMap<String, f64>]) -> Result<Vec<u8>, csv::Error> {
    let keys: Vec<String> = rows.first().map(|r| r.keys().cloned().collect()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&keys)?;
    for r in rows {
        w.write_record(keys.iter().map(|k| r.get(k).map_or(String::new(), |v| fmt_f64(*v))))?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

/// Writes to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Reads two named columns of a CSV file as numbers.
pub fn read_columns(text: &str, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            let known: Vec<&str> = headers.iter().collect();
            format!("no column {name:?}; columns are {known:?}")
        })
    };
    let (ix, iy) = (find(x)?, find(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |i: usize| -> Result<f64, String> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("row {}: {e}", line + 2))
        };
        xs.push(parse(ix)?);
        ys.push(parse(iy)?);
    }
    Ok((xs, ys))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Linear,
    Log,
}

/// One declarative plot over two CSV columns; `x = None` plots against row order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlotSpec {
    pub title: String,
    pub x: Option<String>,
    pub y: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
}

/// Data-only plot description written next to a CSV artifact.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlotManifest {
    pub schema_version: u32,
    pub data: String,
    pub plots: Vec<PlotSpec>,
}

/// Plots for a suite's CSV, keeping those whose columns are present.
pub fn plot_manifest(kind: &str, data: &str, header: &[&str]) -> PlotManifest {
    use Scale::{Linear, Log};
    let p = |title: &str, x: Option<&str>, y: &str, xs: Scale, ys: Scale| PlotSpec {
        title: title.into(),
        x: x.map(Into::into),
        y: y.into(),
        x_scale: xs,
        y_scale: ys,
    };
    let candidates = match kind {
        "torsion-oracle" => vec![p("quadrature error vs Laplacian condition", Some("laplacianCond"), "residual", Log, Log)],
        "gluing-model" => vec![
            p("gluing residual per case", None, "residual", Linear, Log),
            p("worst gluing residual vs R", Some("r"), "maxResidual", Log, Log),
        ],
        "mv-filtration" => vec![p("filtration residual per case", None, "residual", Linear, Log)],
        "transgression" => vec![
            p("transgression residual vs step", Some("step"), "residual", Log, Log),
            p("transgression residual vs step", Some("step"), "maxResidual", Log, Log),
        ],
        "witten-interval" => vec![
            p("largest small eigenvalue vs T", Some("t"), "lambdaSmallMax", Linear, Log),
            p("large-band onset vs T", Some("t"), "largeMin", Log, Log),
            p("smallest fitted decay rate vs T", Some("t"), "alphaHatMin", Linear, Linear),
        ],
        "glued-fiber" => vec![
            p("large-band onset vs T", Some("t"), "largeMin", Log, Log),
            p("largest small eigenvalue vs R", Some("r"), "lambdaSmallMax", Log, Log),
            p("small eigenvalue relative error vs R", Some("r"), "eigenRelErr", Log, Log),
            p("metric ratio error vs R", Some("r"), "metricRatioErr", Log, Log),
            p("de Rham ratio error vs R", Some("r"), "derhamRatioErr", Log, Log),
        ],
        _ => Vec::new(),
    };
    let has = |c: &str| header.contains(&c);
    let plots = candidates.into_iter().filter(|s| s.x.as_deref().is_none_or(has) && has(&s.y)).collect();
    PlotManifest { schema_version: SCHEMA_VERSION, data: data.into(), plots }
}

/// `out/name.csv` becomes `out/name.plot.json`.
pub fn manifest_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("plot.json")
}
