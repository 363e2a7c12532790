//! Torsion forms of metrized complexes: the defining `t`-integral, the closed
//! form of its scalar part, exact sequences, metric pairs, the comparison
//! bound and the transgression identity over a torus grid.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{omega_blocks, FamilyOverGrid};
use crate::grassmann::{degree, mask_key, GrassmannForm};
use crate::hodge::{self, GradedComplex, HodgeData, MetricFamily};
use crate::linalg::{self, CMat};
use crate::quadrature::{integrate_until, GlRule};
use crate::superconnection::{self, FHatEvaluator};

/// Gauss–Legendre order per panel in `u = log t`.
pub const PANEL_ORDER: usize = 32;
/// Agreement required between successive panel refinements.
pub const QUAD_TOL: f64 = 1e-8;
const MAX_PANELS: usize = 8192;

/// Even scalar form with quadrature metadata.
#[derive(Clone, Debug)]
pub struct TorsionForm {
    pub form: GrassmannForm,
    pub quad_error: f64,
    /// Integration window in `t`.
    pub window: (f64, f64),
    pub panels: usize,
}

impl TorsionForm {
    pub fn scalar(&self) -> f64 {
        self.form.scalar(0).re
    }

    pub fn coeff(&self, mask: usize) -> f64 {
        self.form.scalar(mask).re
    }

    pub fn m(&self) -> usize {
        self.form.m()
    }

    /// Torsion form of the degenerate (zero) case.
    pub fn zero(m: usize) -> Self {
        Self { form: GrassmannForm::zero(m, 1), quad_error: 0.0, window: (0.0, 0.0), panels: 0 }
    }

    pub fn to_json(&self) -> TorsionJson {
        let mut coeffs = BTreeMap::new();
        for mask in 0..self.form.n_coeffs() {
            if degree(mask) % 2 == 0 {
                coeffs.insert(mask_key(mask), self.coeff(mask));
            }
        }
        TorsionJson { scalar: self.scalar(), coeffs, quad_error: self.quad_error, window: [self.window.0, self.window.1] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TorsionJson {
    pub scalar: f64,
    pub coeffs: BTreeMap<String, f64>,
    pub quad_error: f64,
    pub window: [f64; 2],
}

/// `χ′ = Σ_k (−1)^k k n_k`.
pub fn chi_prime(ranks: &[usize]) -> f64 {
    ranks
        .iter()
        .enumerate()
        .map(|(k, &n)| if k % 2 == 0 { (k * n) as f64 } else { -((k * n) as f64) })
        .sum()
}

/// Half-width `U` of the window `[e^{-U}, e^{U}]`.
pub fn window_half_width(hd: &HodgeData) -> f64 {
    match hd.nonzero_range() {
        None => 20.0,
        Some((lo, hi)) => 20f64.max(lo.ln().abs() + 20.0).max(hi.ln().abs() + 20.0),
    }
}

/// `𝒯 = −∫₀^∞ [f^∧(A″, h_t) − ½χ′(H) − ½(χ′(W) − χ′(H))(1 − t/2)e^{−t/4}] dt/t`.
///
/// Pass `GrassmannForm::zero(0, n)` as `omega` for a point base.
pub fn torsion_form(cx: &GradedComplex, h: &MetricFamily, omega: &GrassmannForm) -> Result<TorsionForm> {
    let hd = hodge::hodge_decompose(cx, h)?;
    torsion_form_with(cx, h, &hd, omega)
}

pub fn torsion_form_with(
    cx: &GradedComplex,
    h: &MetricFamily,
    hd: &HodgeData,
    omega: &GrassmannForm,
) -> Result<TorsionForm> {
    let m = omega.m();
    // With fewer than two generators only the degree-zero part survives and it
    // does not depend on ω.
    let eval_omega = if m < 2 { GrassmannForm::zero(0, cx.total_dim()) } else { omega.clone() };
    let ev = FHatEvaluator::with_hodge(cx, h, hd, &eval_omega)?;
    let chi_w = chi_prime(cx.dims());
    let chi_h = chi_prime(&hd.betti);
    let u_max = window_half_width(hd);
    let nc = 1usize << ev.m();
    let integrand = |u: f64| -> Vec<f64> {
        let t = u.exp();
        let raw = ev.eval_complex(t);
        let mut v: Vec<f64> = raw.iter().map(|z| z.re).collect();
        v[0] -= 0.5 * chi_h + 0.5 * (chi_w - chi_h) * (1.0 - 0.5 * t) * (-0.25 * t).exp();
        v
    };
    let rule = GlRule::new(PANEL_ORDER);
    let res = integrate_until(&rule, -u_max, u_max, nc, 8, MAX_PANELS, QUAD_TOL, &integrand);
    if !res.converged {
        return Err(Error::Quadrature {
            change: res.change,
            lambda_min: hd.nonzero_range().map_or(0.0, |r| r.0),
        });
    }
    let mut form = GrassmannForm::zero(m, 1);
    for (mask, v) in res.value.iter().enumerate() {
        if degree(mask) % 2 == 0 {
            form.set_coeff(mask, CMat::from_element(1, 1, linalg::c(-v)));
        }
    }
    Ok(TorsionForm { form, quad_error: res.change, window: ((-u_max).exp(), u_max.exp()), panels: res.panels })
}

/// Point-base torsion.
pub fn torsion_point(cx: &GradedComplex, h: &MetricFamily) -> Result<TorsionForm> {
    torsion_form(cx, h, &GrassmannForm::zero(0, cx.total_dim()))
}

/// `½ Σ_k (−1)^k k log det′ Δ_k`.
pub fn torsion_scalar_closed_form(cx: &GradedComplex, h: &MetricFamily) -> Result<f64> {
    let hd = hodge::hodge_decompose(cx, h)?;
    Ok(closed_form_from(&hd))
}

pub fn closed_form_from(hd: &HodgeData) -> f64 {
    (0..hd.dims().len())
        .map(|k| {
            let s = 0.5 * k as f64 * hd.log_det_prime(k);
            if k % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .sum()
}

/// Torsion of an acyclic complex; rejects inputs with nonzero cohomology.
pub fn torsion_exact_sequence(seq: &GradedComplex, h: &MetricFamily, omega: Option<&GrassmannForm>) -> Result<TorsionForm> {
    let hd = hodge::hodge_decompose(seq, h)?;
    if hd.betti.iter().any(|&b| b != 0) {
        return Err(Error::NotExact(hd.betti.clone()));
    }
    let zero = GrassmannForm::zero(0, seq.total_dim());
    torsion_form_with(seq, h, &hd, omega.unwrap_or(&zero))
}

/// Torsion of `F →^{Id} F` with metrics `h₁` on the source and `h₂` on the target.
pub fn torsion_metric_pair(
    h1: &CMat,
    h2: &CMat,
    omega1: Option<&GrassmannForm>,
    omega2: Option<&GrassmannForm>,
) -> Result<TorsionForm> {
    let n = h1.nrows();
    if h2.nrows() != n {
        return Err(Error::Shape("metric pair of different ranks".into()));
    }
    let cx = GradedComplex::two_term(linalg::eye(n));
    let h = MetricFamily::new(vec![h1.clone(), h2.clone()])?;
    let omega = match (omega1, omega2) {
        (Some(a), Some(b)) => {
            if a.m() != b.m() {
                return Err(Error::Shape("connection forms over different bases".into()));
            }
            let mut f = GrassmannForm::zero(a.m(), 2 * n);
            for mask in 0..f.n_coeffs() {
                f.set_coeff(mask, linalg::block_diag(&[a.coeff(mask), b.coeff(mask)]));
            }
            f
        }
        (None, None) => GrassmannForm::zero(0, 2 * n),
        _ => return Err(Error::InvalidArgument("give both connection forms or neither".into())),
    };
    torsion_form(&cx, &h, &omega)
}

/// One side of a comparison: complex, metric and connection form.
pub struct TorsionData<'a> {
    pub cx: &'a GradedComplex,
    pub h: &'a MetricFamily,
    pub omega: &'a GrassmannForm,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonReport {
    /// Largest coefficient difference of the two torsion forms.
    pub lhs_diff: f64,
    /// Smallest `δ` meeting the three closeness hypotheses.
    pub delta_needed: f64,
    pub hypotheses_hold: bool,
    pub bound: f64,
    pub holds: bool,
}

fn op_norm_in(h: &CMat, a: &CMat) -> Result<f64> {
    let l = linalg::cholesky(h)?;
    let li = linalg::lower_inverse(&l);
    Ok(linalg::singular_values(&(l.adjoint() * a * li.adjoint())).first().copied().unwrap_or(0.0))
}

/// Evaluates `|𝒯₁ − 𝒯₂|` against `c δ^{1/2}` under the comparison hypotheses
/// `‖α*∂̃ − ∂‖ ≤ λ_min δ`, `−δh ≤ α*h̃ − h ≤ δh`, `‖α*ω̃ − ω‖ ≤ δ`,
/// `δ < λ_min/(13 λ_max)`.
pub fn compare_torsions_bound(
    a: &TorsionData,
    b: &TorsionData,
    alpha: &[CMat],
    delta: f64,
    lambda_min: f64,
    lambda_max: f64,
    c: f64,
) -> Result<ComparisonReport> {
    if a.cx.dims() != b.cx.dims() {
        return Err(Error::Shape("complexes have different ranks".into()));
    }
    let hda = hodge::hodge_decompose(a.cx, a.h)?;
    let hdb = hodge::hodge_decompose(b.cx, b.h)?;
    if hda.betti != hdb.betti {
        return Err(Error::Shape(format!("cohomology ranks differ: {:?} vs {:?}", hda.betti, hdb.betti)));
    }
    let refs: Vec<&CMat> = alpha.iter().collect();
    let al = linalg::block_diag(&refs);
    let al_inv = linalg::inverse(&al)?;
    let ht = a.h.total();
    let d_pull = &al_inv * b.cx.total_diff() * &al;
    let d_err = op_norm_in(&ht, &(d_pull - a.cx.total_diff()))?;
    let h_pull = al.adjoint() * b.h.total() * &al;
    let l = linalg::cholesky(&ht)?;
    let li = linalg::lower_inverse(&l);
    let h_err = linalg::herm_eigvals(&(&li * (h_pull - &ht) * li.adjoint()))
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut w_err2 = 0.0;
    for mask in 1..a.omega.n_coeffs() {
        if degree(mask) == 1 {
            let pulled = &al_inv * b.omega.coeff(mask) * &al;
            w_err2 += op_norm_in(&ht, &(pulled - a.omega.coeff(mask)))?.powi(2);
        }
    }
    let delta_needed = (d_err / lambda_min).max(h_err).max(w_err2.sqrt());
    let hypotheses_hold = delta_needed <= delta && delta < lambda_min / (13.0 * lambda_max);
    let ta = torsion_form_with(a.cx, a.h, &hda, a.omega)?;
    let tb = torsion_form_with(b.cx, b.h, &hdb, b.omega)?;
    let lhs_diff = (0..ta.form.n_coeffs())
        .map(|mask| (ta.coeff(mask) - tb.coeff(mask)).abs())
        .fold(0.0, f64::max);
    let bound = c * delta.sqrt();
    Ok(ComparisonReport { lhs_diff, delta_needed, hypotheses_hold, bound, holds: lhs_diff <= bound })
}

/// Cohomology bundle of a family in a fixed class basis.
///
/// Classes are represented by harmonic vectors of the identity metric; at each
/// point the induced metric is the Gram matrix of their harmonic projections.
pub struct CohomologyFrame {
    /// Per degree, class representatives as columns.
    pub reps: Vec<CMat>,
}

impl CohomologyFrame {
    pub fn new(cx: &GradedComplex) -> Result<Self> {
        let hd = hodge::hodge_decompose(cx, &MetricFamily::identity(cx.dims()))?;
        Ok(Self { reps: (0..cx.len()).map(|k| hd.harmonic_basis(k)).collect() })
    }

    /// Gram matrices `G_k = (P R_k)† h_k (P R_k)` of the class basis.
    pub fn metric(&self, h: &MetricFamily, hd: &HodgeData) -> Vec<CMat> {
        self.reps
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let hb = hd.harmonic_basis(k);
                let hk = &h.mats()[k];
                // P r = hb hb† h r for an h-orthonormal harmonic basis
                let pr = &hb * (hb.adjoint() * hk * r);
                pr.adjoint() * hk * pr
            })
            .collect()
    }

    /// Class coordinates of a cocycle `z` in degree `k`.
    pub fn coordinates(&self, k: usize, z: &CMat) -> CMat {
        self.reps[k].adjoint() * z
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransgressionReport {
    pub max_residual: f64,
    pub step: f64,
    pub points: usize,
    pub warnings: Vec<String>,
}

/// Checks `d𝒯 = f(∇^W, h^W) − f(∇^H, h^H)` on the grid, with `d𝒯` by central
/// differences of the degree-zero part of `𝒯`.
pub fn transgression_check(fam: &FamilyOverGrid) -> Result<TransgressionReport> {
    let n = fam.n_points();
    let frame = CohomologyFrame::new(&fam.cx)?;
    let mut tors = Vec::with_capacity(n);
    let mut gram = Vec::with_capacity(n);
    let mut betti0: Option<Vec<usize>> = None;
    for idx in 0..n {
        let h = fam.metric(idx);
        let hd = hodge::hodge_decompose(&fam.cx, h)?;
        match &betti0 {
            None => betti0 = Some(hd.betti.clone()),
            Some(b) if *b != hd.betti => {
                return Err(Error::JumpingCohomology(format!("{:?} at point 0, {:?} at point {idx}", b, hd.betti)))
            }
            _ => {}
        }
        tors.push(closed_or_quadrature(&fam.cx, h, &hd)?);
        gram.push(frame.metric(h, &hd));
    }
    let dx = fam.step();
    let mut warnings = Vec::new();
    let mut max_residual: f64 = 0.0;
    for idx in 0..n {
        let sample = crate::family::omega_from_family(fam, idx)?;
        if let Some(w) = sample.warning {
            if warnings.len() < 5 {
                warnings.push(format!("point {idx}: {w}"));
            }
        }
        let fw = superconnection::f_odd(&omega_blocks(fam, idx)?)?;
        let omega_h: Vec<GrassmannForm> = (0..fam.cx.len())
            .map(|k| {
                let g0 = &gram[idx][k];
                let parts: Vec<CMat> = (0..fam.m)
                    .map(|axis| {
                        let gp = &gram[fam.shift(idx, axis, true)][k];
                        let gm = &gram[fam.shift(idx, axis, false)][k];
                        Ok(linalg::inverse(g0)? * (gp - gm).scale(0.5 / dx))
                    })
                    .collect::<Result<_>>()?;
                Ok(GrassmannForm::one_form(parts))
            })
            .collect::<Result<_>>()?;
        let fh = superconnection::f_odd(&omega_h)?;
        for axis in 0..fam.m {
            let dt = (tors[fam.shift(idx, axis, true)] - tors[fam.shift(idx, axis, false)]) / (2.0 * dx);
            let mask = 1 << axis;
            let rhs = fw.scalar(mask).re - fh.scalar(mask).re;
            max_residual = max_residual.max((dt - rhs).abs());
        }
    }
    Ok(TransgressionReport { max_residual, step: dx, points: n, warnings })
}

/// Degree-zero torsion through the defining integral.
fn closed_or_quadrature(cx: &GradedComplex, h: &MetricFamily, hd: &HodgeData) -> Result<f64> {
    Ok(torsion_form_with(cx, h, hd, &GrassmannForm::zero(0, cx.total_dim()))?.scalar())
}
