//! The Morse profile `f_∞`, the cutoff `χ`, the truncated profile `f_T` on
//! `[−1, 1]` and the quantities derived from them.
//!
//! `f_∞` is even with `f_∞ = 1 − s²/2` on `|s| ≤ 1/4` and `(|s| − 1)²/2` on
//! `3/4 ≤ |s| ≤ 1`; in between `f′_∞` blends through a plateau at `−2` whose
//! width is tuned so that `f_∞(±1) = 0`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature::GlRule;

/// Transition width of the blends in `f′_∞`; fixes `∫₀¹ f′_∞ = −1`.
pub const BLEND_WIDTH: f64 = 0.035_918_435_568_374_99;
/// Below this `T` the closed form for `f_T − f_∞` does not apply.
const CLOSED_FORM_MIN_T: f64 = 0.84;
/// `e^{T²}` is treated as infinite beyond this exponent.
const MAX_EXPONENT: f64 = 700.0;

/// `C^∞` step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let (p, q) = ((-1.0 / x).exp(), (-1.0 / (1.0 - x)).exp());
        p / (p + q)
    }
}

pub fn smooth_step_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let (p, q) = ((-1.0 / x).exp(), (-1.0 / (1.0 - x)).exp());
        let (dp, dq) = (p / (x * x), -q / ((1.0 - x) * (1.0 - x)));
        (dp * q - p * dq) / ((p + q) * (p + q))
    }
}

/// `χ = 0` on `(−∞, 1/4]`, `1` on `[1/2, ∞)`, `0 ≤ χ′ ≤ 8`.
pub fn chi(x: f64) -> f64 {
    smooth_step(4.0 * x - 1.0)
}

pub fn chi_prime(x: f64) -> f64 {
    4.0 * smooth_step_prime(4.0 * x - 1.0)
}

/// Left cylinder cutoff `1 − χ(4(s + 1))`.
pub fn chi1(s: f64) -> f64 {
    1.0 - chi(4.0 * (s + 1.0))
}

/// Right cylinder cutoff `1 − χ(4(1 − s))`.
pub fn chi2(s: f64) -> f64 {
    1.0 - chi(4.0 * (1.0 - s))
}

/// Middle cutoff `1 − χ(4|s|)`.
pub fn chi3(s: f64) -> f64 {
    1.0 - chi(4.0 * s.abs())
}

pub fn f_inf_prime(s: f64) -> f64 {
    let x = s.abs();
    let a = smooth_step((x - 0.25) / BLEND_WIDTH);
    let b = smooth_step((x - (0.75 - BLEND_WIDTH)) / BLEND_WIDTH);
    let v = (1.0 - a) * (-x) + a * ((1.0 - b) * (-2.0) + b * (x - 1.0));
    if s < 0.0 {
        -v
    } else {
        v
    }
}

const TABLE_PANELS: usize = 512;

/// Cumulative `∫_{1/4}^{x_j} f′_∞` at panel ends of the blend region.
fn middle_table() -> &'static (GlRule, Vec<f64>) {
    static TABLE: OnceLock<(GlRule, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| {
        let rule = GlRule::new(16);
        let h = 0.5 / TABLE_PANELS as f64;
        let mut acc = vec![0.0; TABLE_PANELS + 1];
        for j in 0..TABLE_PANELS {
            let lo = 0.25 + j as f64 * h;
            acc[j + 1] = acc[j] + rule.integrate(lo, lo + h, f_inf_prime);
        }
        (rule, acc)
    })
}

pub fn f_inf(s: f64) -> f64 {
    let x = s.abs().min(1.0);
    if x <= 0.25 {
        1.0 - 0.5 * x * x
    } else if x >= 0.75 {
        0.5 * (x - 1.0) * (x - 1.0)
    } else {
        let (rule, acc) = middle_table();
        let h = 0.5 / TABLE_PANELS as f64;
        let j = (((x - 0.25) / h) as usize).min(TABLE_PANELS - 1);
        let lo = 0.25 + j as f64 * h;
        1.0 - 0.5 * 0.0625 + acc[j] + rule.integrate(lo, x, f_inf_prime)
    }
}

/// `χ(e^{T²}(1 − |s|))`, with the `e^{T²}` overflow treated as infinity.
fn endpoint_factor(t: f64, s: f64) -> f64 {
    let gap = 1.0 - s.abs();
    if gap <= 0.0 {
        return 0.0;
    }
    if t * t > MAX_EXPONENT {
        return 1.0;
    }
    chi((t * t).exp() * gap)
}

/// `f′_T(s) = f′_∞(s) χ(e^{T²}(1 − |s|))`.
pub fn f_t_prime(t: f64, s: f64) -> f64 {
    f_inf_prime(s) * endpoint_factor(t, s)
}

/// `J(Z) = ∫₀^{min(Z, 1/2)} z(1 − χ(z)) dz`.
fn endpoint_integral(z: f64) -> f64 {
    static RULE: OnceLock<GlRule> = OnceLock::new();
    let rule = RULE.get_or_init(|| GlRule::new(32));
    let z = z.min(0.5);
    if z <= 0.25 {
        0.5 * z * z
    } else {
        0.03125 + rule.integrate(0.25, z, |x| x * (1.0 - chi(x)))
    }
}

/// The unique `f_T` with `f_T(±1) = 0` and derivative `f′_T`.
pub fn f_t(t: f64, s: f64) -> f64 {
    let x = s.abs().min(1.0);
    if t * t > MAX_EXPONENT {
        return f_inf(x);
    }
    if t >= CLOSED_FORM_MIN_T {
        // only the quadratic end region is touched by the cutoff
        let e = (t * t).exp();
        return f_inf(x) - endpoint_integral(e * (1.0 - x)) / (e * e);
    }
    static RULE: OnceLock<GlRule> = OnceLock::new();
    let rule = RULE.get_or_init(|| GlRule::new(32));
    let panels = 64;
    let h = (1.0 - x) / panels as f64;
    -(0..panels)
        .map(|j| {
            let lo = x + j as f64 * h;
            rule.integrate(lo, lo + h, |u| f_t_prime(t, u))
        })
        .sum::<f64>()
}

/// `f_T`, `f′_T` sampled on a uniform grid of `n + 1` points on `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct DeformationProfile {
    pub t: f64,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
    pub fp: Vec<f64>,
}

pub fn profile(t: f64, n: usize) -> Result<DeformationProfile> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("T must be nonnegative, got {t}")));
    }
    if n < 16 {
        return Err(Error::GridTooCoarse(format!("profile needs N ≥ 16, got {n}")));
    }
    let s: Vec<f64> = (0..=n).map(|j| -1.0 + 2.0 * j as f64 / n as f64).collect();
    let f = s.iter().map(|&x| f_t(t, x)).collect();
    let fp = s.iter().map(|&x| f_t_prime(t, x)).collect();
    Ok(DeformationProfile { t, s, f, fp })
}

/// `a_{R,T} = R ∫_{−1}^{1} χ₃(s) e^{2T f_T(s) − T} ds`.
pub fn a_rt(r: f64, t: f64) -> f64 {
    let rule = GlRule::new(32);
    let mut total = 0.0;
    // χ₃ is supported on |s| ≤ 1/8 and equal to 1 on |s| ≤ 1/16
    let breaks = [-0.125, -0.0625, 0.0, 0.0625, 0.125];
    for w in breaks.windows(2) {
        let panels = 8;
        let h = (w[1] - w[0]) / panels as f64;
        for j in 0..panels {
            let lo = w[0] + j as f64 * h;
            total += rule.integrate(lo, lo + h, |s| chi3(s) * (2.0 * t * f_t(t, s) - t).exp());
        }
    }
    r * total
}

/// `b_{R,T} = π^{1/2} R T^{−1/2} e^T`.
pub fn b_rt(r: f64, t: f64) -> f64 {
    PI.sqrt() * r * t.powf(-0.5) * t.exp()
}
