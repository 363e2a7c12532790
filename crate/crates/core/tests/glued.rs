use std::f64::consts::PI;

use torsionlab_core::fit;
use torsionlab_core::glued::{self, FiberSpec, FiberTopology, GluedOperator};
use torsionlab_core::linalg::{self, CMat, CVec, C64};
use torsionlab_core::mv_model::{self, Variant};
use torsionlab_core::random;
use torsionlab_core::witten;

fn phase(theta: f64) -> CMat {
    CMat::from_element(1, 1, C64::new(theta.cos(), theta.sin()))
}

fn free_fiber(topology: FiberTopology, r_half: f64) -> FiberSpec {
    FiberSpec { topology, l1: 1.0, l2: 1.0, r_half, t: 0.0, rank: 1 }
}

fn glued(topology: FiberTopology, r_half: f64) -> GluedOperator {
    let spec = FiberSpec::with_kappa(topology, 1, r_half, 0.3).unwrap();
    glued::assemble_glued(&spec, 200).unwrap()
}

fn positive_eigenvalues(op: &GluedOperator, k: usize) -> Vec<f64> {
    let m = &op.line.matrix;
    let zero = m.count_below(1e-8);
    m.eigenvalues_by_index(zero, zero + k)
}

#[test]
fn free_interval_spectrum() {
    // R·D on an interval of length ℓ with absolute ends: {0} ∪ {±R kπ/ℓ}
    let spec = free_fiber(FiberTopology::Interval, 1.0);
    let op = glued::assemble_glued(&spec, 500).unwrap();
    let ell = spec.length();
    for (k, l) in positive_eigenvalues(&op, 3).iter().enumerate() {
        let exact = (k + 1) as f64 * PI / ell;
        assert!((l / exact - 1.0).abs() < 1e-4, "{l} vs {exact}");
    }
    let m = &op.line.matrix;
    assert_eq!(m.count_below(1e-8) - m.count_below(-1e-8), 1);
}

#[test]
fn free_circle_spectrum() {
    let theta = 2.0;
    let spec = free_fiber(FiberTopology::Circle { holonomy: phase(theta) }, 1.0);
    let op = glued::assemble_glued(&spec, 500).unwrap();
    let ell = spec.length();
    let mut exact: Vec<f64> = (-3..=3).map(|k| (2.0 * PI * k as f64 + theta).abs() / ell).collect();
    exact.sort_by(f64::total_cmp);
    for (l, e) in positive_eigenvalues(&op, 3).iter().zip(&exact) {
        assert!((l / e - 1.0).abs() < 1e-4, "{l} vs {e}");
    }
    let m = &op.line.matrix;
    assert_eq!(m.count_below(1e-8) - m.count_below(-1e-8), 0);
}

#[test]
fn spec_validation() {
    assert!(FiberSpec::with_kappa(FiberTopology::Interval, 1, 8.0, 0.4).is_err());
    assert!(FiberSpec::with_kappa(FiberTopology::Interval, 1, 8.0, 0.0).is_err());
    let bad = CMat::from_element(1, 1, C64::new(1.5, 0.0));
    assert!(FiberSpec::with_kappa(FiberTopology::Circle { holonomy: bad }, 1, 8.0, 0.3).is_err());
    let spec = FiberSpec { r_half: 8.3, ..free_fiber(FiberTopology::Interval, 8.0) };
    assert!(glued::assemble_glued(&spec, 7).is_err());
}

#[test]
fn kernel_matches_cohomology() {
    for (topology, expected) in [
        (FiberTopology::Interval, 1),
        (FiberTopology::Circle { holonomy: phase(2.0) }, 0),
        (FiberTopology::Circle { holonomy: phase(0.0) }, 2),
    ] {
        let op = glued(topology, 8.0);
        assert_eq!(op.spec.expected_kernel_dim(), expected);
        let g = glued::gap_check(&op);
        assert_eq!(g.kernel_dim, expected);
        assert_eq!(g.n_small, glued::model_small_count(&op));
        assert!(!g.ambiguous);
    }
}

#[test]
fn model_pair_cohomology() {
    let interval = glued(FiberTopology::Interval, 8.0);
    let pd = glued::model_pair(&interval).unwrap();
    assert_eq!((pd.w12_dim(0), pd.vquot_dim(0)), (1, 0));
    let circle = glued(FiberTopology::Circle { holonomy: phase(2.0) }, 8.0);
    let pd = glued::model_pair(&circle).unwrap();
    assert_eq!((pd.w12_dim(0), pd.vquot_dim(0)), (0, 0));
}

#[test]
fn spectrum_is_symmetric() {
    let op = glued(FiberTopology::Circle { holonomy: phase(2.0) }, 8.0);
    let m = &op.line.matrix;
    let n = m.dim();
    let low = m.eigenvalues_by_index(0, 5);
    let high = m.eigenvalues_by_index(n - 5, n);
    for (a, b) in low.iter().zip(high.iter().rev()) {
        assert!((a + b).abs() < 1e-9 * a.abs(), "{a} {b}");
    }
    let g = glued::gap_check(&op);
    let mut s = g.small.clone();
    s.sort_by(f64::total_cmp);
    for (a, b) in s.iter().zip(s.iter().rev()) {
        assert!((a + b).abs() < 1e-10, "{s:?}");
    }
}

#[test]
fn model_singular_value_oracle() {
    // interval: W₁ = W₂ = V = ℂ, τ = 1, h^W = (√π/2)RT^{−1/2}, h^V = √π R T^{−1/2};
    // ∂ = c(w₂ − w₁) with c = π^{−1/2}R^{−1}T^{1/2}e^{−T}, so ‖∂‖² = 2c²·h^V/h^W = 4c²
    for r in [8.0, 20.0] {
        let op = glued(FiberTopology::Interval, r);
        let t = op.spec.t;
        let pd = glued::model_pair(&op).unwrap();
        let cs = mv_model::build_complexes(&pd, &Variant::scaled(r, t)).unwrap();
        let hw = &cs[0].metric.mats()[0];
        let hv = &cs[0].metric.mats()[1];
        let d = &cs[0].cx.diff()[0];
        let lap = linalg::inverse(hw).unwrap() * d.adjoint() * hv * d;
        let top = linalg::herm_eigvals(&linalg::hermitian_part(&lap)).into_iter().fold(0.0, f64::max);
        let c = t.sqrt() * (-t).exp() / (PI.sqrt() * r);
        assert!((top.sqrt() / (2.0 * c) - 1.0).abs() < 1e-12);
        let sc = glued::extract_small_complex(&op).unwrap();
        let predicted = 2.0 * t.sqrt() * (-t).exp() / PI.sqrt();
        for m in &sc.report.model_nonzero {
            assert!((m.abs() / predicted - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn small_complex_structure() {
    for topology in [FiberTopology::Interval, FiberTopology::Circle { holonomy: phase(2.0) }] {
        let op = glued(topology, 8.0);
        let sc = glued::extract_small_complex(&op).unwrap();
        let rep = &sc.report;
        let (w, v) = (op.pieces.len(), op.necks.len());
        assert_eq!((rep.dim0, rep.dim1), (w, v));
        assert!(rep.d_squared <= 1e-10);
        assert!(rep.band_invariance <= 1e-10);
        assert!(rep.condition.is_finite() && rep.condition >= 1.0);
        // R·d on the band carries the nonzero small eigenvalues
        let mut sv: Vec<f64> = linalg::singular_values(&sc.d).into_iter().map(|x| x * op.spec.r_half).collect();
        sv.retain(|&x| x > 1e-9);
        let mut pos: Vec<f64> = rep.small_nonzero.iter().copied().filter(|&x| x > 0.0).collect();
        sv.sort_by(f64::total_cmp);
        pos.sort_by(f64::total_cmp);
        assert_eq!(sv.len(), pos.len());
        for (a, b) in sv.iter().zip(&pos) {
            assert!((a / b - 1.0).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn trial_sections_have_pure_degree() {
    let op = glued(FiberTopology::Circle { holonomy: phase(2.0) }, 8.0);
    let (g, iv) = glued::trial_sections(&op);
    for j in 0..g.ncols() {
        let y: CVec = g.column(j).into_owned();
        assert!((op.line.degree_zero_part(&y) - &y).norm() < 1e-14);
    }
    for j in 0..iv.ncols() {
        let y: CVec = iv.column(j).into_owned();
        assert!(op.line.degree_zero_part(&y).norm() < 1e-14);
    }
}

#[test]
fn small_eigenvalue_approaches_model_as_t_grows() {
    let mut errs = Vec::new();
    for t in [4.0, 8.0, 12.0] {
        let spec = FiberSpec { t, ..free_fiber(FiberTopology::Interval, 16.0) };
        let op = glued::assemble_glued(&spec, 200).unwrap();
        errs.push(glued::extract_small_complex(&op).unwrap().report.eigen_rel_err);
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[2] < 0.1, "{errs:?}");
}

#[test]
fn large_band_onset_reaches_sqrt_2t() {
    let spec = FiberSpec { t: 64.0, ..free_fiber(FiberTopology::Interval, 8.0) };
    let op = glued::assemble_glued(&spec, 200).unwrap();
    let g = glued::gap_check(&op);
    assert!((g.large_min / (2.0 * 64.0f64).sqrt() - 1.0).abs() < 0.05, "{}", g.large_min);
}

#[test]
fn zero_mode_block_matches_interval_operator() {
    let t = 3.0;
    let blocks = glued::cylinder_blocks(&[(0.0, 1), (1.5, 2)], 20.0, t, 400).unwrap();
    let reference = witten::assemble(1, &linalg::eye(1), &linalg::eye(1), t, 400).unwrap();
    let (a, b) = (&blocks[0].op.matrix, &reference.matrix);
    assert_eq!(a.dim(), b.dim());
    for i in 0..a.dim() {
        for j in i.saturating_sub(a.bandwidth())..=i {
            assert_eq!(a.get(i, j), b.get(i, j));
        }
    }
    let ea = a.eigenvalues_by_index(0, 10);
    let eb = b.eigenvalues_by_index(0, 10);
    for (x, y) in ea.iter().zip(&eb) {
        assert!((x - y).abs() < 1e-10);
    }
    assert_eq!(blocks[1].op.spec.r, 2);
}

#[test]
fn mass_term_squares_off() {
    let (r, t, n) = (20.0, 2.0, 120);
    let blocks = glued::cylinder_blocks(&[(0.0, 1), (-1.5, 1), (3.0, 1)], r, t, n).unwrap();
    let d0 = blocks[0].op.matrix.to_dense();
    let d0sq = &d0 * &d0;
    for b in &blocks[1..] {
        let m = r * b.mu;
        let d = b.op.matrix.to_dense();
        let defect = linalg::max_abs(&(&d * &d - &d0sq - linalg::eye(d.nrows()).scale(m * m)));
        assert!(defect < 1e-10 * m * m, "{defect}");
        let lowest = linalg::herm_eigvals(&d).into_iter().map(f64::abs).fold(f64::INFINITY, f64::min);
        assert!(lowest >= m.abs() * (1.0 - 1e-12));
    }
}

#[test]
fn nonzero_modes_stay_under_envelope() {
    let r = 20.0;
    let t = 2.0;
    let blocks = glued::cylinder_blocks(&[(1.5, 1), (-1.5, 1), (3.0, 2), (-3.0, 1)], r, t, 4000).unwrap();
    let mut rng = random::case_rng(71, 0);
    for b in &blocks {
        let k = b.multiplicity;
        for lambda in [0.0, 1.0, -2.5, r.sqrt()] {
            let left: CVec = random::complex_gaussian(&mut rng, k, 1).column(0).into_owned();
            let right: CVec = random::complex_gaussian(&mut rng, k, 1).column(0).into_owned();
            let y = b.op.solve_interior(lambda, &left, &right).unwrap();
            let rep = glued::check_nz_decay(b, &y, lambda, b.mu.abs(), r, 0.05);
            assert!(rep.skipped.is_none());
            assert_eq!(rep.violations, 0, "μ = {} λ = {lambda}: worst {}", b.mu, rep.worst_ratio);
            assert!(rep.mid_ratio < (-b.mu.abs() * r / 2.0).exp());
        }
        // a constant section is not a solution and breaks the envelope
        let ones = vec![CVec::from_element(k, C64::new(1.0, 0.0)); b.op.n_vertices()];
        let zeros = vec![CVec::zeros(k); b.op.n_edges()];
        let y = b.op.from_values(&ones, &zeros);
        assert!(glued::check_nz_decay(b, &y, 0.0, b.mu.abs(), r, 0.05).violations > 0);
    }
    let y = CVec::zeros(blocks[0].op.dim());
    assert!(glued::check_nz_decay(&blocks[0], &y, 2.0 * r.sqrt(), 1.5, r, 0.05).skipped.is_some());
}

#[test]
fn envelope_interpolates_endpoints() {
    for (alpha, a, b) in [(3.0, 1.0, 0.5), (30.0, 2.0, 7.0)] {
        assert!((glued::c_alpha(alpha, a, b, -1.0) - a).abs() < 1e-12 * a);
        assert!((glued::c_alpha(alpha, a, b, 1.0) - b).abs() < 1e-12 * b);
        assert!(glued::c_alpha(alpha, a, b, 0.0) < a.min(b));
    }
}

fn pairing_deviation(n: usize, t: f64, lambda: f64) -> f64 {
    let block = glued::cylinder_blocks(&[(0.0, 2)], 20.0, t, n).unwrap().remove(0);
    let left = CVec::from_vec(vec![C64::new(1.0, 0.5), C64::new(-0.3, 0.8)]);
    let right = CVec::from_vec(vec![C64::new(0.2, -1.0), C64::new(0.7, 0.1)]);
    let y = block.op.solve_interior(lambda, &left, &right).unwrap();
    let rep = glued::check_zm_pairing(&block.op, &y);
    assert!(rep.mean.norm() > 1e-3);
    rep.max_deviation
}

#[test]
fn zero_mode_pairing_is_constant_to_second_order() {
    let ns = [200.0, 400.0, 800.0];
    let devs: Vec<f64> = ns.iter().map(|&n| pairing_deviation(n as usize, 2.0, 0.7)).collect();
    let hs: Vec<f64> = ns.iter().map(|n| 2.0 / n).collect();
    let order = fit::log_log_fit(&hs, &devs).unwrap().slope;
    assert!(order >= 1.9, "order {order}, deviations {devs:?}");
}

#[test]
fn zero_mode_pairing_controls() {
    // plane wave a = e^{iλs}, b = i e^{iλs} solves c ∂_s ω = λ ω at T = 0
    let lambda = 2.3;
    let s: Vec<f64> = (0..=100).map(|k| -1.0 + 0.02 * k as f64).collect();
    let a: Vec<CVec> = s.iter().map(|&x| CVec::from_element(1, C64::new(0.0, lambda * x).exp())).collect();
    let b: Vec<CVec> = a.iter().map(|v| v * C64::new(0.0, 1.0)).collect();
    let rep = glued::pairing_of_values(&a, &b);
    assert!(rep.max_deviation < 1e-14);
    assert!((rep.mean - C64::new(0.0, 2.0)).norm() < 1e-14);

    let block = glued::cylinder_blocks(&[(0.0, 1)], 20.0, 2.0, 400).unwrap().remove(0);
    let mut rng = random::case_rng(72, 0);
    let y: CVec = random::complex_gaussian(&mut rng, block.op.dim(), 1).column(0).into_owned();
    assert!(glued::check_zm_pairing(&block.op, &y).max_deviation > 1e-2);
}
