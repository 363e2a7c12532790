use proptest::prelude::*;
use torsionlab_core::fit;

#[test]
fn exact_line_has_zero_error() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
    let f = fit::linear_fit(&x, &y).unwrap();
    assert!((f.slope - 3.0).abs() < 1e-14 && (f.intercept + 2.0).abs() < 1e-13);
    assert!(f.slope_stderr < 1e-12 && (f.r_squared - 1.0).abs() < 1e-14);
}

#[test]
fn known_standard_error() {
    // residuals ±1 alternate: sse = 4, var = 2, sxx = 5
    let x = [0.0, 1.0, 2.0, 3.0];
    let y = [1.0, 0.0, 3.0, 2.0];
    let f = fit::linear_fit(&x, &y).unwrap();
    assert!((f.slope - 0.6).abs() < 1e-14);
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - f.intercept - f.slope * a).powi(2)).sum();
    assert!((f.slope_stderr - (sse / 2.0 / 5.0).sqrt()).abs() < 1e-14);
}

#[test]
fn power_law_slope() {
    let x = [4.0, 8.0, 16.0, 32.0];
    let y: Vec<f64> = x.iter().map(|v: &f64| 7.0 * v.powf(-0.425)).collect();
    assert!((fit::log_log_fit(&x, &y).unwrap().slope + 0.425).abs() < 1e-13);
    assert!(fit::log_log_fit(&x, &[1.0, -1.0, 1.0, 1.0]).is_err());
}

#[test]
fn degenerate_inputs_rejected() {
    assert!(fit::linear_fit(&[1.0], &[2.0]).is_err());
    assert!(fit::linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_err());
    assert!(fit::linear_fit(&[1.0, 2.0], &[2.0]).is_err());
    assert!(fit::linear_fit(&[1.0, f64::NAN], &[2.0, 3.0]).is_err());
}

proptest! {
    #[test]
    fn slope_is_affine_equivariant(ys in prop::collection::vec(-10.0f64..10.0, 5), a in 0.1f64..5.0, b in -5.0f64..5.0) {
        let x = [0.0, 1.0, 2.5, 3.0, 7.0];
        let f = fit::linear_fit(&x, &ys).unwrap();
        let scaled: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
        let g = fit::linear_fit(&x, &scaled).unwrap();
        prop_assert!((g.slope - a * f.slope).abs() < 1e-10);
        prop_assert!((g.intercept - (a * f.intercept + b)).abs() < 1e-9);
    }
}
