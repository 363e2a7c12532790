use proptest::prelude::*;
use torsionlab_core::profile::*;

#[test]
fn endpoints_vanish_and_centre_is_one() {
    for t in [0.0, 0.5, 1.0, 3.0, 30.0] {
        assert!(f_t(t, 1.0).abs() < 1e-12 && f_t(t, -1.0).abs() < 1e-12, "T = {t}");
    }
    assert!((f_inf(0.0) - 1.0).abs() < 1e-15);
    // at T = 0 the cutoff χ(1 − |s|) removes the outer quarter of the slope
    assert!((f_t(0.0, 0.0) - 0.75).abs() < 1e-6);
    for t in [1.0, 2.0] {
        assert!((f_t(t, 0.0) - 1.0).abs() <= (-2.0 * t * t as f64).exp() / 8.0);
    }
    assert_eq!(f_t_prime(0.0, 0.0), 0.0);
}

#[test]
fn profile_closes_up() {
    // the plateau width makes the middle region integrate to exactly −1 overall
    assert!((f_inf(0.75 - 1e-9) - 0.03125).abs() < 1e-9);
    assert!((f_inf(0.74999) - f_inf(0.75001)).abs() < 1e-4);
}

#[test]
fn derivative_matches_difference_quotient() {
    for &s in &[0.1, 0.3, 0.5, 0.7, 0.9, -0.6] {
        let h = 1e-5;
        let fd = (f_inf(s + h) - f_inf(s - h)) / (2.0 * h);
        assert!((fd - f_inf_prime(s)).abs() < 1e-7, "s = {s}: {fd} vs {}", f_inf_prime(s));
    }
    for &t in &[0.3, 1.2] {
        for &s in &[0.5, 0.99, 1.0 - 0.3 * (-t * t as f64).exp()] {
            let h = 1e-6;
            let fd = (f_t(t, s + h) - f_t(t, s - h)) / (2.0 * h);
            assert!((fd - f_t_prime(t, s)).abs() < 1e-6, "T = {t}, s = {s}");
        }
    }
}

#[test]
fn truncation_error_is_below_envelope() {
    let p = profile(3.0, 4000).unwrap();
    let worst = p.s.iter().zip(&p.f).map(|(&s, &f)| (f - f_inf(s)).abs()).fold(0.0, f64::max);
    assert!(worst <= 10.0 * (-9f64).exp(), "{worst}");
}

#[test]
fn cutoff_bounds() {
    let slope = (0..=10000).map(|j| chi_prime(j as f64 / 10000.0)).fold(0.0, f64::max);
    assert!(slope <= 8.0 + 1e-9 && slope > 7.99);
    assert_eq!(chi(0.25), 0.0);
    assert_eq!(chi(0.5), 1.0);
    assert_eq!(chi3(0.0), 1.0);
    assert_eq!(chi3(0.2), 0.0);
    assert_eq!(chi1(-1.0), 1.0);
    assert_eq!(chi2(1.0), 1.0);
}

#[test]
fn a_and_b_agree_asymptotically() {
    // the cutoff χ₃ keeps |s| ≤ 1/8, so the Gaussian tail sets a slow rate
    let gaps: Vec<f64> = [32.0, 64.0, 128.0, 256.0].iter().map(|&t| 1.0 - a_rt(10.0, t) / b_rt(10.0, t)).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0), "{gaps:?}");
    assert!(gaps[3] < 0.05);
    let rate = (gaps[2] / gaps[3]).ln() / 128.0;
    assert!(rate > 0.005, "{rate}");
}

#[test]
fn rejects_coarse_grid() {
    assert!(profile(1.0, 8).is_err());
}

proptest! {
    #[test]
    fn slope_is_bounded_and_odd(s in -1.0f64..1.0, t in 0.0f64..10.0) {
        prop_assert!(f_t_prime(t, s).abs() <= 2.0 + 1e-9);
        prop_assert!((f_t_prime(t, s) + f_t_prime(t, -s)).abs() < 1e-15);
        prop_assert!((f_t(t, s) - f_t(t, -s)).abs() < 1e-12);
    }
}
