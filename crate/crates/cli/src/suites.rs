//! Suite runners: each kind expands its config into cases, evaluates them in
//! parallel and adds sweep rows, fits and aggregate checks.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;
use torsionlab_core::family::FamilyOverGrid;
use torsionlab_core::glued::{self, FiberSpec, FiberTopology};
use torsionlab_core::hodge::{self, GradedComplex, MetricFamily};
use torsionlab_core::linalg::{self, CMat, C64};
use torsionlab_core::mv_model::{self, Variant};
use torsionlab_core::random::{self, StratumShape};
use torsionlab_core::{torsion, witten};

use crate::config::*;
use crate::report::{fit_check, CaseResult, Check, FitModel, FitResult};

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub cases: Vec<CaseResult>,
    pub sweep: Vec<BTreeMap<String, f64>>,
    pub fits: Vec<FitResult>,
    pub checks: Vec<Check>,
}

fn values(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn failed(id: String, err: impl std::fmt::Display, replay: serde_json::Value) -> CaseResult {
    CaseResult { id, pass: false, residual: f64::NAN, values: BTreeMap::new(), replay: json!({ "input": replay, "error": err.to_string() }) }
}

fn shape_json(s: &StratumShape) -> serde_json::Value {
    json!({ "w1": s.w1, "w2": s.w2, "v": s.v, "rank1": s.rank1, "rank2": s.rank2 })
}

pub fn run(cfg: &ExperimentConfig) -> Outcome {
    match cfg {
        ExperimentConfig::TorsionOracle(c) => torsion_oracle(c),
        ExperimentConfig::GluingModel(c) => gluing_model(c),
        ExperimentConfig::MvFiltration(c) => mv_filtration(c),
        ExperimentConfig::Transgression(c) => transgression(c),
        ExperimentConfig::WittenInterval(c) => witten_interval(c),
        ExperimentConfig::GluedFiber(c) => glued_fiber(c),
    }
}

/// Random metrized complex whose nonzero Laplacian spectrum has condition at
/// most `max_cond`; redraws from the same stream until one qualifies.
pub fn oracle_instance(
    rng: &mut impl Rng,
    max_total_dim: usize,
    max_cond: f64,
) -> torsionlab_core::error::Result<(GradedComplex, MetricFamily, f64)> {
    for _ in 0..200 {
        let len = rng.random_range(2..=5usize);
        let cap = (max_total_dim / len).clamp(1, 8);
        let dims: Vec<usize> = (0..len).map(|_| rng.random_range(1..=cap)).collect();
        let ranks = random::random_ranks(rng, &dims);
        // conditioning drawn log-uniformly so the bound is actually approached
        let basis_cond = 10f64.powf(rng.random_range(0.0..1.5));
        let metric_cond = 10f64.powf(rng.random_range(0.0..3.0));
        let cx = random::complex_with_ranks(rng, &dims, &ranks, basis_cond)?;
        let h = random::metric(rng, &dims, metric_cond)?;
        let hd = hodge::hodge_decompose(&cx, &h)?;
        let cond = hd.nonzero_range().map_or(1.0, |(lo, hi)| hi / lo);
        if cond <= max_cond {
            return Ok((cx, h, cond));
        }
    }
    Err(torsionlab_core::error::Error::Numerical("no instance within the condition bound".into()))
}

fn torsion_oracle(c: &TorsionOracleConfig) -> Outcome {
    let cases = (0..c.cases)
        .into_par_iter()
        .map(|i| {
            let id = format!("case-{i}");
            let replay = json!({ "seed": c.seed, "index": i });
            let mut rng = random::case_rng(c.seed, i as u64);
            let mut run = || -> torsionlab_core::error::Result<CaseResult> {
                let (cx, h, cond) = oracle_instance(&mut rng, c.max_total_dim, c.max_laplacian_cond)?;
                let quad = torsion::torsion_point(&cx, &h)?.scalar();
                let exact = torsion::torsion_scalar_closed_form(&cx, &h)?;
                let residual = (quad - exact).abs();
                Ok(CaseResult {
                    id: id.clone(),
                    pass: residual < c.tolerance,
                    residual,
                    values: values(&[
                        ("totalDim", cx.total_dim() as f64),
                        ("degrees", cx.len() as f64),
                        ("laplacianCond", cond),
                        ("quadrature", quad),
                        ("closedForm", exact),
                    ]),
                    replay: json!({ "seed": c.seed, "index": i, "dims": cx.dims() }),
                })
            };
            run().unwrap_or_else(|e| failed(id.clone(), e, replay))
        })
        .collect();
    Outcome { cases, ..Default::default() }
}

fn random_pair(
    seed: u64,
    index: u64,
    strata: usize,
    max_dim: usize,
    cond: f64,
    quotient: bool,
) -> (torsionlab_core::error::Result<mv_model::PairData>, Vec<StratumShape>) {
    let mut rng = random::case_rng(seed, index);
    let shapes: Vec<StratumShape> = (0..strata)
        .map(|q| if quotient && q == 0 { StratumShape::with_quotient(&mut rng, max_dim) } else { StratumShape::random(&mut rng, max_dim) })
        .collect();
    (random::pair_data(&mut rng, &shapes, cond), shapes)
}

fn gluing_model(c: &GluingModelConfig) -> Outcome {
    let rs: Vec<Option<f64>> = match c.variant {
        VariantKind::Plain => vec![None],
        VariantKind::Scaled => c.r_list.iter().map(|&r| Some(r)).collect(),
    };
    let jobs: Vec<(Option<f64>, usize)> = rs.iter().flat_map(|&r| (0..c.cases).map(move |i| (r, i))).collect();
    let cases: Vec<CaseResult> = jobs
        .par_iter()
        .map(|&(r, i)| {
            let id = match r {
                Some(r) => format!("R{r}-case-{i}"),
                None => format!("case-{i}"),
            };
            let (pd, shapes) = random_pair(c.seed, i as u64, c.strata, c.max_dim, c.metric_cond, false);
            let replay = json!({ "seed": c.seed, "index": i, "r": r, "shapes": shapes.iter().map(shape_json).collect::<Vec<_>>() });
            let variant = match r {
                Some(r) => Variant::scaled(r, r.powf(c.kappa)),
                None => Variant::Plain,
            };
            match pd.and_then(|pd| mv_model::gluing_check(&pd, &variant)) {
                Ok(rep) => {
                    let [t0, t1, t2, t3, th] = rep.per_term_torsions;
                    CaseResult {
                        id,
                        pass: rep.residual < c.tolerance,
                        residual: rep.residual,
                        values: values(&[
                            ("r", r.unwrap_or(0.0)),
                            ("t0", t0),
                            ("t1", t1),
                            ("t2", t2),
                            ("t3", t3),
                            ("tH", th),
                            ("combo", rep.combo),
                        ]),
                        replay,
                    }
                }
                Err(e) => failed(id, e, replay),
            }
        })
        .collect();
    let mut sweep = Vec::new();
    if c.variant == VariantKind::Scaled {
        for &r in &c.r_list {
            let rows: Vec<&CaseResult> = cases.iter().filter(|k| k.values.get("r") == Some(&r)).collect();
            let worst = rows.iter().map(|k| k.residual).fold(0.0, f64::max);
            let passed = rows.iter().filter(|k| k.pass).count();
            sweep.push(values(&[("r", r), ("t", r.powf(c.kappa)), ("cases", rows.len() as f64), ("passed", passed as f64), ("maxResidual", worst)]));
        }
    }
    Outcome { cases, sweep, ..Default::default() }
}

fn mv_filtration(c: &MvFiltrationConfig) -> Outcome {
    let t = c.r.powf(c.kappa);
    let cases = (0..c.cases)
        .into_par_iter()
        .map(|i| {
            let id = format!("case-{i}");
            let (pd, shapes) = random_pair(c.seed, i as u64, c.strata, c.max_dim, c.metric_cond, c.require_quotient);
            let replay = json!({ "seed": c.seed, "index": i, "shapes": shapes.iter().map(shape_json).collect::<Vec<_>>() });
            let run = || -> torsionlab_core::error::Result<CaseResult> {
                let pd = pd?;
                let quotient: usize = (0..pd.strata()).map(|q| pd.vquot_dim(q)).sum();
                let rep = mv_model::mv_filtration_decompose(&pd, c.r, t, None, None)?;
                let vert: f64 = rep.vert.iter().map(|v| v.abs()).sum();
                Ok(CaseResult {
                    id: id.clone(),
                    pass: rep.residual < c.tolerance,
                    residual: rep.residual,
                    values: values(&[("tH", rep.t_h), ("vquotDim", quotient as f64), ("vertAbsSum", vert), ("aRT", rep.a_rt)]),
                    replay: replay.clone(),
                })
            };
            run().unwrap_or_else(|e| failed(id.clone(), e, replay.clone()))
        })
        .collect::<Vec<_>>();
    let nontrivial = cases.iter().filter(|k| k.values.get("vquotDim").is_some_and(|&v| v > 0.0)).count();
    let checks = if c.require_quotient {
        vec![Check {
            name: "cases with nontrivial V_quot".into(),
            value: nontrivial as f64,
            bound: format!("= {}", c.cases),
            pass: nontrivial == c.cases,
        }]
    } else {
        Vec::new()
    };
    Outcome { cases, checks, ..Default::default() }
}

/// Trivial line bundle over `𝕋¹` with metric `e^{2u}` on the target of the
/// identity differential; its torsion is `−u`.
pub fn line_bundle_family(g: usize, amplitude: f64) -> torsionlab_core::error::Result<FamilyOverGrid> {
    let one = |x: f64| CMat::from_element(1, 1, C64::new(x, 0.0));
    let cx = GradedComplex::new(vec![1, 1], vec![one(1.0)])?;
    FamilyOverGrid::from_fn(cx, 1, g, |x| {
        let u = amplitude * (2.0 * PI * x[0]).sin();
        MetricFamily::new(vec![one(1.0), one((2.0 * u).exp())])
    })
}

fn transgression(c: &TransgressionConfig) -> Outcome {
    let cases: Vec<CaseResult> = c
        .grids
        .par_iter()
        .map(|&g| {
            let id = format!("grid-{g}");
            let replay = json!({ "grid": g, "amplitude": c.amplitude });
            match line_bundle_family(g, c.amplitude).and_then(|f| torsion::transgression_check(&f)) {
                Ok(rep) => CaseResult {
                    id,
                    pass: rep.max_residual.is_finite(),
                    residual: rep.max_residual,
                    values: values(&[("grid", g as f64), ("step", rep.step), ("warnings", rep.warnings.len() as f64)]),
                    replay,
                },
                Err(e) => failed(id, e, replay),
            }
        })
        .collect();
    let sweep = cases.iter().map(|k| {
        let mut v = k.values.clone();
        v.insert("maxResidual".into(), k.residual);
        v
    });
    let sweep: Vec<_> = sweep.collect();
    let steps: Vec<f64> = cases.iter().filter_map(|k| k.values.get("step").copied()).collect();
    let res: Vec<f64> = cases.iter().map(|k| k.residual).collect();
    let mut fit = fit_check("transgression residual vs step", &steps, &res, FitModel::LogLog, None);
    fit.expected = Some(2.0);
    fit.pass = fit.slope >= c.min_order;
    let pairwise = res.windows(2).zip(steps.windows(2)).map(|(r, s)| (r[0] / r[1]).ln() / (s[0] / s[1]).ln()).fold(f64::INFINITY, f64::min);
    let checks = vec![Check {
        name: "smallest pairwise convergence order".into(),
        value: pairwise,
        bound: format!(">= {}", c.min_order),
        pass: pairwise >= c.min_order,
    }];
    Outcome { cases, sweep, fits: vec![fit], checks }
}

pub fn default_boundary_configs() -> Vec<BoundaryConfig> {
    use Subspace::{Full, None, Random};
    let b = |rank, v1, v2| BoundaryConfig { rank, v1, v2 };
    vec![
        b(1, Full, Full),
        b(1, Full, None),
        b(1, None, Full),
        b(1, None, None),
        b(2, Full, Full),
        b(2, Random { dim: 1 }, Full),
        b(2, Random { dim: 1 }, Random { dim: 1 }),
        b(2, None, Random { dim: 1 }),
        b(2, Random { dim: 1 }, None),
        b(3, Random { dim: 2 }, Random { dim: 1 }),
        b(3, Random { dim: 1 }, Random { dim: 2 }),
        b(3, Full, Random { dim: 2 }),
    ]
}

fn subspace(rng: &mut impl Rng, r: usize, s: &Subspace) -> CMat {
    match s {
        Subspace::Full => linalg::eye(r),
        Subspace::None => CMat::zeros(r, 0),
        Subspace::Random { dim } => random::complex_gaussian(rng, r, *dim),
    }
}

fn witten_interval(c: &WittenIntervalConfig) -> Outcome {
    let configs = c.configs.clone().unwrap_or_else(default_boundary_configs);
    let spaces: Vec<(CMat, CMat)> = configs
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let mut rng = random::case_rng(c.seed, k as u64);
            let v1 = subspace(&mut rng, b.rank, &b.v1);
            (v1, subspace(&mut rng, b.rank, &b.v2))
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..c.t_list.len()).flat_map(|ti| (0..configs.len()).map(move |k| (ti, k))).collect();
    let cases: Vec<CaseResult> = jobs
        .par_iter()
        .map(|&(ti, k)| {
            let t = c.t_list[ti];
            let b = &configs[k];
            let (v1, v2) = &spaces[k];
            let n = (c.cells_per_t as f64 * t.max(1.0)).ceil() as usize;
            let id = format!("T{t}-config-{k}");
            let replay = json!({ "seed": c.seed, "t": t, "cells": n, "config": b });
            match witten::assemble(b.rank, v1, v2, t, n) {
                Ok(op) => {
                    let rep = witten::band_report(&op, t);
                    let kernel = witten::expected_kernel_dim(v1, v2);
                    let expected = rep.expected_small.unwrap_or(0);
                    let pass = rep.count_matches() && !rep.ambiguous && rep.kernel_dim == kernel;
                    CaseResult {
                        id,
                        pass,
                        residual: (rep.n_small as f64 - expected as f64).abs(),
                        values: values(&[
                            ("t", t),
                            ("config", k as f64),
                            ("rank", b.rank as f64),
                            ("dimV1", v1.ncols() as f64),
                            ("dimV2", v2.ncols() as f64),
                            ("nSmall", rep.n_small as f64),
                            ("expectedSmall", expected as f64),
                            ("kernelDim", rep.kernel_dim as f64),
                            ("lambdaSmallMax", rep.lambda_small_max),
                            ("largeMin", rep.large_min),
                            ("alphaHat", rep.alpha_hat),
                            ("betaHat", rep.beta_hat),
                        ]),
                        replay,
                    }
                }
                Err(e) => failed(id, e, replay),
            }
        })
        .collect();
    let get = |k: &CaseResult, key: &str| k.values.get(key).copied().unwrap_or(f64::NAN);
    let sweep = c
        .t_list
        .iter()
        .map(|&t| {
            let rows: Vec<&CaseResult> = cases.iter().filter(|k| get(k, "t") == t).collect();
            values(&[
                ("t", t),
                ("cells", (c.cells_per_t as f64 * t.max(1.0)).ceil()),
                ("configs", rows.len() as f64),
                ("countsMatch", rows.iter().all(|k| k.pass) as u8 as f64),
                ("nSmall", rows.iter().map(|k| get(k, "nSmall")).sum()),
                ("lambdaSmallMax", rows.iter().map(|k| get(k, "lambdaSmallMax")).fold(0.0, f64::max)),
                ("alphaHatMin", rows.iter().map(|k| get(k, "alphaHat")).fold(f64::INFINITY, f64::min)),
            ])
        })
        .collect();
    let mut fits = Vec::new();
    let mut checks = Vec::new();
    for k in 0..configs.len() {
        let rows: Vec<&CaseResult> = cases.iter().filter(|r| get(r, "config") == k as f64).collect();
        let ts: Vec<f64> = rows.iter().map(|r| get(r, "t")).collect();
        let small: Vec<f64> = rows.iter().map(|r| get(r, "lambdaSmallMax")).collect();
        if ts.len() >= 3 && small.iter().all(|&v| v > 0.0) {
            fits.push(fit_check(
                &format!("config {k}: log max|λ_small| vs T"),
                &ts,
                &small,
                FitModel::SemiLog,
                Some((c.decay_slope, c.slope_tolerance)),
            ));
        }
        let alphas: Vec<f64> = rows.iter().map(|r| get(r, "alphaHat")).collect();
        let (lo, hi) = alphas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        checks.push(Check {
            name: format!("config {k}: max/min α̂ over T"),
            value: hi / lo,
            bound: format!("< {}", c.max_alpha_ratio),
            pass: hi / lo < c.max_alpha_ratio,
        });
    }
    Outcome { cases, sweep, fits, checks }
}

fn fiber_topology(c: &GluedFiberConfig) -> FiberTopology {
    match c.topology {
        FiberKind::Interval => FiberTopology::Interval,
        FiberKind::Circle => {
            let rho = C64::new(c.theta.cos(), c.theta.sin());
            FiberTopology::Circle { holonomy: linalg::eye(c.rank) * rho }
        }
    }
}

fn glued_fiber(c: &GluedFiberConfig) -> Outcome {
    let cases: Vec<CaseResult> = c
        .r_list
        .par_iter()
        .map(|&r| {
            let id = format!("R{r}");
            let replay = json!({ "r": r, "kappa": c.kappa, "topology": c.topology, "theta": c.theta, "rank": c.rank, "cellsPerUnit": c.cells_per_unit });
            let run = || -> torsionlab_core::error::Result<CaseResult> {
                let spec = FiberSpec::with_kappa(fiber_topology(c), c.rank, r, c.kappa)?;
                let op = glued::assemble_glued(&spec, c.cells_per_unit)?;
                let gap = glued::gap_check(&op);
                let kernel = spec.expected_kernel_dim();
                let empty_zone = gap.large_min >= spec.t.sqrt();
                let pass = gap.count_matches() && !gap.ambiguous && gap.kernel_dim == kernel && empty_zone;
                let mut v = values(&[
                    ("r", r),
                    ("t", spec.t),
                    ("dim", op.line.dim() as f64),
                    ("nSmall", gap.n_small as f64),
                    ("expectedSmall", glued::model_small_count(&op) as f64),
                    ("kernelDim", gap.kernel_dim as f64),
                    ("lambdaSmallMax", gap.lambda_small_max),
                    ("largeMin", gap.large_min),
                    ("alphaHat", gap.alpha_hat),
                ]);
                let mut model_ok = true;
                if c.small_complex {
                    let sc = glued::extract_small_complex(&op)?;
                    let rep = &sc.report;
                    let predicted = 2.0 * spec.t.sqrt() * (-spec.t).exp() / PI.sqrt();
                    let constant_err = rep.model_nonzero.iter().map(|m| (m.abs() / predicted - 1.0).abs()).fold(0.0, f64::max);
                    model_ok = constant_err < 1e-10 && !rep.model_nonzero.is_empty();
                    v.extend(values(&[
                        ("eigenRelErr", rep.eigen_rel_err),
                        ("metricRatioErr", rep.metric_ratio_err),
                        ("derhamRatioErr", rep.derham_ratio_err),
                        ("condition", rep.condition),
                        ("modelConstantErr", constant_err),
                    ]));
                }
                Ok(CaseResult {
                    id: id.clone(),
                    pass: pass && model_ok,
                    residual: (gap.n_small as f64 - glued::model_small_count(&op) as f64).abs(),
                    values: v,
                    replay: replay.clone(),
                })
            };
            run().unwrap_or_else(|e| failed(id.clone(), e, replay.clone()))
        })
        .collect();
    let col = |key: &str| -> Vec<f64> { cases.iter().map(|k| k.values.get(key).copied().unwrap_or(f64::NAN)).collect() };
    let mut fits = vec![fit_check(
        "log min|λ_large| vs log T",
        &col("t"),
        &col("largeMin"),
        FitModel::LogLog,
        Some((c.onset_slope, c.onset_tolerance)),
    )];
    if c.small_complex {
        let exponent = -(0.5 - c.kappa / 4.0);
        for key in ["eigenRelErr", "metricRatioErr", "derhamRatioErr"] {
            fits.push(fit_check(
                &format!("log {key} vs log R"),
                &col("r"),
                &col(key),
                FitModel::LogLog,
                Some((exponent, c.exponent_tolerance)),
            ));
        }
    }
    let sweep = cases.iter().map(|k| k.values.clone()).collect();
    Outcome { cases, sweep, fits, checks: Vec::new() }
}
