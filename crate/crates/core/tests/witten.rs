use std::f64::consts::PI;

use torsionlab_core::fit;
use torsionlab_core::linalg::{self, CMat, C64};
use torsionlab_core::witten::{self, LineOperator};

fn full(r: usize) -> CMat {
    linalg::eye(r)
}

fn none(r: usize) -> CMat {
    CMat::zeros(r, 0)
}

fn first_positive(op: &LineOperator, k: usize) -> Vec<f64> {
    let m = &op.matrix;
    let zero = m.count_below(1e-8);
    m.eigenvalues_by_index(zero, zero + k)
}

#[test]
fn free_spectrum_with_absolute_ends() {
    let op = witten::assemble(1, &full(1), &full(1), 0.0, 2000).unwrap();
    let ev = first_positive(&op, 3);
    for (k, l) in ev.iter().enumerate() {
        let exact = (k + 1) as f64 * PI / 2.0;
        assert!((l / exact - 1.0).abs() < 1e-4, "{l} vs {exact}");
    }
    assert_eq!(op.matrix.count_below(1e-8) - op.matrix.count_below(-1e-8), 1);
}

#[test]
fn free_spectrum_with_mixed_ends() {
    let op = witten::assemble(1, &full(1), &none(1), 0.0, 2000).unwrap();
    let ev = first_positive(&op, 3);
    for (k, l) in ev.iter().enumerate() {
        let exact = (2 * k + 1) as f64 * PI / 4.0;
        assert!((l / exact - 1.0).abs() < 1e-4, "{l} vs {exact}");
    }
    assert_eq!(op.matrix.count_below(1e-8) - op.matrix.count_below(-1e-8), 0);
}

#[test]
fn free_spectrum_converges_at_second_order() {
    let err = |n: usize| {
        let op = witten::assemble(1, &full(1), &full(1), 0.0, n).unwrap();
        (first_positive(&op, 3)[2] / (1.5 * PI) - 1.0).abs()
    };
    let (e1, e2) = (err(200), err(400));
    assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
}

#[test]
fn clifford_identities_are_exact() {
    for r in 1..4 {
        let (c, chat) = witten::clifford_blocks(r);
        assert_eq!(witten::clifford_defect(&c, &chat), 0.0);
    }
}

#[test]
fn small_band_counts() {
    let cases = [(full(1), full(1), 3), (full(1), none(1), 2)];
    for (v1, v2, expected) in cases {
        let op = witten::assemble(1, &v1, &v2, 8.0, 400).unwrap();
        let rep = witten::band_report(&op, 8.0);
        assert_eq!(rep.n_small, expected);
        assert!(rep.count_matches() && !rep.ambiguous);
        assert_eq!(rep.kernel_dim, witten::expected_kernel_dim(&v1, &v2));
    }
}

#[test]
fn spectrum_is_symmetric() {
    let v1 = CMat::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.5, 0.2)]);
    let op = witten::assemble(2, &v1, &full(2), 3.0, 200).unwrap();
    let m = &op.matrix;
    let (lo, hi) = (m.count_below(-0.5), m.count_below(0.5));
    let n = op.dim();
    assert_eq!(lo, n - hi);
    let ev = m.eigenvalues_by_index(0, n);
    for k in 0..lo {
        assert!((ev[k] + ev[n - 1 - k]).abs() < 1e-8);
    }
    let (small, _) = m.eigenpairs_in(-0.5, 0.5).unwrap();
    assert_eq!(small.len(), hi - lo);
    for k in 0..small.len() {
        assert!((small[k] + small[small.len() - 1 - k]).abs() < 1e-11);
    }
}

#[test]
fn rejects_coarse_grid() {
    assert!(witten::assemble(1, &full(1), &full(1), 10.0, 400).is_err());
}

#[test]
fn eigenvectors_satisfy_boundary_conditions() {
    let v1 = CMat::from_column_slice(2, 1, &[C64::new(0.6, 0.0), C64::new(0.8, 0.0)]);
    let op = witten::assemble(2, &v1, &none(2), 4.0, 300).unwrap();
    let (vals, vecs) = op.matrix.eigenpairs_in(-2.0, 2.0).unwrap();
    assert!(!vals.is_empty());
    for (l, y) in vals.iter().zip(&vecs) {
        let res = op.matrix.matvec(y) - y * C64::new(*l, 0.0);
        assert!(res.norm() < 1e-8);
        let (a, b) = witten::section_values(&op, y);
        assert!(witten::boundary_residual(&op, &a, &b).unwrap().defect < 1e-10);
    }
}

#[test]
fn boundary_defect_moves_section_off_band_linearly() {
    let op = witten::assemble(1, &none(1), &full(1), 4.0, 400).unwrap();
    let (vals, vecs) = op.matrix.eigenpairs_in(1.0, 20.0).unwrap();
    let reps: Vec<_> = [1e-3, 2e-3, 4e-3]
        .iter()
        .map(|&eps| witten::boundary_perturbation(&op, vals[0], &vecs[0], eps, 1e-3).unwrap())
        .collect();
    for w in reps.windows(2) {
        assert!(w[1].defect > w[0].defect);
        let slope = (w[1].distance / w[1].epsilon) / (w[0].distance / w[0].epsilon);
        assert!((slope - 1.0).abs() < 0.05, "slope ratio {slope}");
    }
    assert!(reps[0].distance > 0.0 && reps[0].distance < 1.0);
}

fn cols(r: usize, vs: &[&[C64]]) -> CMat {
    CMat::from_fn(r, vs.len(), |i, j| vs[j][i])
}

/// `(r, V₁, V₂, dim V₁∩V₂ + dim V₁^⊥∩V₂^⊥)`, kernel dimensions counted by hand.
fn configurations() -> Vec<(usize, CMat, CMat, usize)> {
    let c = |x: f64, y: f64| C64::new(x, y);
    let o = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let line = [c(0.6, 0.0), c(0.0, 0.8)];
    let other = [c(0.8, 0.0), c(0.6, 0.0)];
    let perp = [c(0.8, 0.0), c(0.0, -0.6)];
    vec![
        (1, full(1), full(1), 1),
        (1, full(1), none(1), 0),
        (1, none(1), full(1), 0),
        (1, none(1), none(1), 1),
        (2, full(2), full(2), 2),
        (2, cols(2, &[&line]), full(2), 1),
        (2, cols(2, &[&line]), cols(2, &[&other]), 0),
        (2, cols(2, &[&line]), cols(2, &[&line]), 2),
        (2, cols(2, &[&line]), cols(2, &[&perp]), 0),
        (2, none(2), cols(2, &[&other]), 1),
        (3, cols(3, &[&[one, o, o], &[o, one, o]]), cols(3, &[&[o, one, o]]), 2),
        (3, cols(3, &[&[one, o, o], &[o, one, o]]), cols(3, &[&[o, one, o], &[o, o, one]]), 1),
    ]
}

#[test]
fn small_band_count_over_configurations() {
    let t = 10.0;
    for (r, v1, v2, kernel) in configurations() {
        let op = witten::assemble(r, &v1, &v2, t, 500).unwrap();
        let rep = witten::band_report(&op, t);
        assert_eq!(rep.n_small, v1.ncols() + v2.ncols() + r, "r {r} dims {} {}", v1.ncols(), v2.ncols());
        assert!(!rep.ambiguous);
        assert_eq!(rep.kernel_dim, kernel);
        assert_eq!(witten::expected_kernel_dim(&v1, &v2), kernel);
    }
}

#[test]
fn small_band_decays_like_exp_minus_t() {
    let ts = [6.0, 8.0, 10.0, 12.0];
    let mut small = Vec::new();
    let mut alpha = Vec::new();
    for &t in &ts {
        let op = witten::assemble(1, &full(1), &full(1), t, (50.0 * t) as usize).unwrap();
        let rep = witten::band_report(&op, t);
        assert!(rep.count_matches());
        small.push(rep.lambda_small_max);
        alpha.push(rep.alpha_hat);
    }
    let f = fit::semi_log_fit(&ts, &small).unwrap();
    assert!((f.slope + 1.0).abs() < 0.1, "slope {}", f.slope);
    let (lo, hi) = alpha.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 2.0);
}

#[test]
fn boundary_perturbation_constant_within_t_three_halves() {
    let ts = [2.0, 3.0, 4.0, 6.0];
    let mut k = Vec::new();
    for &t in &ts {
        let op = witten::assemble(1, &none(1), &full(1), t, (100.0 * t) as usize).unwrap();
        let (vals, vecs) = op.matrix.eigenpairs_in(0.0, 1.0).unwrap();
        let rep = witten::boundary_perturbation(&op, vals[0], &vecs[0], 1e-3, 1.0).unwrap();
        k.push(rep.distance / rep.epsilon);
    }
    let c = k[0] / ts[0].powf(1.5);
    for (kt, t) in k.iter().zip(&ts) {
        assert!(*kt <= c * t.powf(1.5) * (1.0 + 1e-9));
    }
    assert!(fit::log_log_fit(&ts, &k).unwrap().slope <= 1.5);
}
