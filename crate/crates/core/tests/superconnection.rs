use proptest::prelude::*;
use rand::Rng;
use torsionlab_core::grassmann::{self, GrassmannForm, GrassmannJson};
use torsionlab_core::hodge::{GradedComplex, MetricFamily};
use torsionlab_core::linalg::{self, CMat, C64};
use torsionlab_core::random;
use torsionlab_core::superconnection::{self as sc, Branch};

fn random_form(rng: &mut impl Rng, m: usize, d: usize, body: bool) -> GrassmannForm {
    let mut f = GrassmannForm::zero(m, d);
    for mask in 0..1usize << m {
        if mask == 0 && !body {
            continue;
        }
        f.set_coeff(mask, random::complex_gaussian(rng, d, d));
    }
    f
}

fn hermitian(rng: &mut impl Rng, d: usize) -> CMat {
    let a = random::complex_gaussian(rng, d, d);
    (&a + a.adjoint()).scale(0.5)
}

/// Skew-Hermitian body `iA` with `‖A‖ ≤ 1` plus random souls.
fn skew_form(rng: &mut impl Rng, m: usize, d: usize) -> (GrassmannForm, CMat) {
    let a = hermitian(rng, d);
    let a = a.scale(1.0 / linalg::herm_eigvals(&a).iter().fold(1.0f64, |s, v| s.max(v.abs())));
    let mut f = random_form(rng, m, d, false);
    f.set_coeff(0, &a * C64::new(0.0, 1.0));
    (f, a)
}

fn close(a: &GrassmannForm, b: &GrassmannForm, tol: f64) -> bool {
    (a - b).max_abs() <= tol * a.max_abs().max(1.0)
}

/// `ω = h^{-1} dh` for a random tangent `dh` at a random metric.
fn metric_derivative_omega(rng: &mut impl Rng, dims: &[usize], m: usize) -> (GradedComplex, MetricFamily, GrassmannForm) {
    let ranks = random::random_ranks(rng, dims);
    let cx = random::complex_with_ranks(rng, dims, &ranks, 5.0).unwrap();
    let h = random::metric(rng, dims, 5.0).unwrap();
    let parts: Vec<CMat> = (0..m)
        .map(|_| {
            let blocks: Vec<CMat> =
                h.mats().iter().map(|hk| linalg::inverse(hk).unwrap() * hermitian(rng, hk.nrows())).collect();
            let refs: Vec<&CMat> = blocks.iter().collect();
            linalg::block_diag(&refs)
        })
        .collect();
    (cx, h, GrassmannForm::one_form(parts))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_is_associative(seed in any::<u64>(), m in 0usize..=4, d in 1usize..=3) {
        let mut rng = random::case_rng(seed, 0);
        let (a, b, c) = (random_form(&mut rng, m, d, true), random_form(&mut rng, m, d, true), random_form(&mut rng, m, d, true));
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-12));
        let id = GrassmannForm::identity(m, d);
        prop_assert_eq!(&(&id * &a), &a);
    }

    #[test]
    fn soul_is_nilpotent(seed in any::<u64>(), m in 0usize..=4, d in 1usize..=3) {
        let mut rng = random::case_rng(seed, 1);
        let x = random_form(&mut rng, m, d, false);
        prop_assert_eq!(x.pow(m + 1).max_abs(), 0.0);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>(), m in 0usize..=4, d in 1usize..=3) {
        let mut rng = random::case_rng(seed, 2);
        let x = random_form(&mut rng, m, d, true);
        let text = serde_json::to_string(&x.to_json()).unwrap();
        let back: GrassmannJson = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(GrassmannForm::from_json(&back).unwrap(), x);
    }

    #[test]
    fn fprime_body_matches_hermitian_calculus(seed in any::<u64>(), m in 0usize..=3, d in 1usize..=4) {
        let mut rng = random::case_rng(seed, 3);
        let (x, a) = skew_form(&mut rng, m, d);
        let y = sc::matfun_fprime(&x).unwrap();
        // f′(iA) = (1 − 2A²) e^{−A²}
        let (lam, u) = linalg::herm_eig(&a);
        let diag = CMat::from_fn(d, d, |i, j| if i == j { linalg::c((1.0 - 2.0 * lam[i] * lam[i]) * (-lam[i] * lam[i]).exp()) } else { linalg::c(0.0) });
        let expect = &u * diag * u.adjoint();
        prop_assert!(linalg::max_abs(&(y.body() - expect)) < 1e-10);
    }

    #[test]
    fn fprime_matches_power_series(seed in any::<u64>(), m in 1usize..=3, d in 1usize..=3) {
        let mut rng = random::case_rng(seed, 4);
        let (x, _) = skew_form(&mut rng, m, d);
        let y = sc::matfun_fprime(&x).unwrap();
        // (1 + 2X²) e^{X²} = Σ_j (X^{2j} + 2X^{2j+2}) / j!
        let x2 = &x * &x;
        let mut pw = GrassmannForm::identity(m, d);
        let mut series = GrassmannForm::zero(m, d);
        let mut fact = 1.0;
        for j in 0..40 {
            if j > 0 {
                fact *= j as f64;
            }
            let next = &pw * &x2;
            series = &series + &(&pw + &next.scale(linalg::c(2.0))).scale(linalg::c(1.0 / fact));
            pw = next;
        }
        prop_assert!(close(&y, &series, 1e-10));
    }

    #[test]
    fn duhamel_expansion_terminates(seed in any::<u64>(), m in 1usize..=4, d in 1usize..=3) {
        let mut rng = random::case_rng(seed, 5);
        // zero body: the Duhamel series is a finite sum in X²
        let mut x = random_form(&mut rng, m, d, false);
        x = x.map_coeffs(|_, a| (a - a.adjoint()).scale(0.5));
        let y = sc::matfun_fprime(&x).unwrap();
        let x2 = &x * &x;
        let jmax = m / 2;
        let mut series = GrassmannForm::zero(m, d);
        let mut fact = 1.0;
        for j in 0..=jmax {
            if j > 0 {
                fact *= j as f64;
            }
            let p = x2.pow(j);
            series = &series + &(&p + &(&p * &x2).scale(linalg::c(2.0))).scale(linalg::c(1.0 / fact));
        }
        prop_assert!(close(&y, &series, 1e-12));
        prop_assert_eq!(x2.pow(jmax + 1).max_abs(), 0.0);
    }

    #[test]
    fn evaluator_matches_direct(seed in any::<u64>(), m in 1usize..=2) {
        let mut rng = random::case_rng(seed, 6);
        let dims: Vec<usize> = (0..rng.random_range(2..=3)).map(|_| rng.random_range(1..=3)).collect();
        let (cx, h, omega) = metric_derivative_omega(&mut rng, &dims, m);
        for t in [0.05, 1.0, 7.0] {
            let a = sc::f_hat_complex(&cx, &h, &omega, t).unwrap();
            let b = sc::f_hat_direct(&cx, &h, &omega, t).unwrap();
            let scale = a.iter().fold(1.0f64, |s, z| s.max(z.norm()));
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).norm() < 1e-9 * scale);
            }
        }
    }
}

#[test]
fn characteristic_forms_are_real() {
    let mut worst = 0.0f64;
    for i in 0..500u64 {
        let mut rng = random::case_rng(91, i);
        let m = rng.random_range(1..=4);
        let dims: Vec<usize> = (0..rng.random_range(2..=4)).map(|_| rng.random_range(1..=3)).collect();
        let (cx, h, omega) = metric_derivative_omega(&mut rng, &dims, m);
        let t = 10f64.powf(rng.random_range(-2.0..2.0));
        let even = sc::f_hat_complex(&cx, &h, &omega, t).unwrap();
        let odd = sc::f_odd_complex(&sc::split_by_degree(&omega, cx.dims()), Branch::Principal).unwrap();
        for coeffs in [&even, &odd] {
            let mag = coeffs.iter().fold(0.0f64, |s, z| s.max(z.norm()));
            let im = coeffs.iter().fold(0.0f64, |s, z| s.max(z.im.abs()));
            worst = worst.max(im / mag.max(1.0));
        }
    }
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn odd_form_is_branch_independent() {
    for i in 0..100u64 {
        let mut rng = random::case_rng(92, i);
        let m = rng.random_range(1..=4);
        let dims: Vec<usize> = (0..3).map(|_| rng.random_range(1..=3)).collect();
        let (cx, _, omega) = metric_derivative_omega(&mut rng, &dims, m);
        let blocks = sc::split_by_degree(&omega, cx.dims());
        let a = sc::f_odd_complex(&blocks, Branch::Principal).unwrap();
        let b = sc::f_odd_complex(&blocks, Branch::Opposite).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() <= 1e-12 * u.norm().max(1.0));
        }
        // only odd degrees survive
        for (mask, z) in a.iter().enumerate() {
            if grassmann::degree(mask) % 2 == 0 {
                assert_eq!(z.norm(), 0.0);
            }
        }
    }
}

#[test]
fn odd_form_of_a_line_is_the_trace() {
    // one degree, ω = g₁ a: the one-form part of f(∇, h) is tr ω / 2
    let omega = GrassmannForm::generator(1, 1, CMat::from_element(1, 1, linalg::c(0.8)));
    let f = sc::f_odd(&[omega]).unwrap();
    assert!((f.scalar(1).re - 0.4).abs() < 1e-14);
}

#[test]
fn divided_differences() {
    assert!((sc::divided_difference_exp(&[0.3]) - 0.3f64.exp()).abs() < 1e-15);
    // confluent: exp[x, x, x] = eˣ / 2
    assert!((sc::divided_difference_exp(&[0.7, 0.7, 0.7]) - 0.7f64.exp() / 2.0).abs() < 1e-14);
    // symmetric pair: exp[−a, a] = sinh(a) / a
    for a in [1e-9, 1e-4, 0.3, 0.5, 2.0, 15.0] {
        let got = sc::divided_difference_exp(&[-a, a]);
        let want = a.sinh() / a;
        assert!((got / want - 1.0).abs() < 1e-13, "{a}: {got} {want}");
    }
    // separated points against the two-point formula
    let (x, y) = (-3.0f64, 4.5f64);
    let want = (y.exp() - x.exp()) / (y - x);
    assert!((sc::divided_difference_exp(&[x, y]) / want - 1.0).abs() < 1e-13);
    // three points: exp[x, y, z] via recursion on separated points
    let z = 1.25f64;
    let xy = (y.exp() - x.exp()) / (y - x);
    let yz = (z.exp() - y.exp()) / (z - y);
    let want = (yz - xy) / (z - x);
    assert!((sc::divided_difference_exp(&[x, y, z]) / want - 1.0).abs() < 1e-12);
    // clustered points stay continuous
    let near = sc::divided_difference_exp(&[1.0, 1.0 + 1e-9, 1.0 - 1e-9]);
    assert!((near - 1f64.exp() / 2.0).abs() < 1e-12);
}

#[test]
fn curly_x_rejects_bad_input() {
    let cx = GradedComplex::two_term(CMat::from_element(1, 1, linalg::c(1.0)));
    let h = MetricFamily::identity(&[1, 1]);
    assert!(sc::curly_x(&cx, &h, &GrassmannForm::zero(0, 2), 0.0).is_err());
    assert!(sc::curly_x(&cx, &h, &GrassmannForm::zero(0, 3), 1.0).is_err());
    let not_skew = GrassmannForm::from_body(0, linalg::eye(2));
    assert!(sc::matfun_fprime(&not_skew).is_err());
}
