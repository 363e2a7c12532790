//! The finite-dimensional Mayer–Vietoris model: the complexes `C(σ₁, σ₂)`
//! built from a pair of maps into `V`, the short exact sequence relating the
//! four of them, the induced long exact sequence in cohomology, plain and
//! `(R, T)`-scaled metrics, and the torsion identities among them.
//!
//! All spaces are graded by a fibre degree `q`; the total degree of
//! `C^{p,q}` is `p + q`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{omega_from_family, FamilyOverGrid};
use crate::hodge::{self, GradedComplex, MetricFamily};
use crate::linalg::{self, CMat};
use crate::profile;
use crate::torsion::{self, CohomologyFrame};

const RANK_TOL: f64 = 1e-10;

/// `τ₁: W₁ → V`, `τ₂: W₂ → V` per fibre degree, with metrics.
#[derive(Clone, Debug)]
pub struct PairData {
    pub w1: Vec<usize>,
    pub w2: Vec<usize>,
    pub v: Vec<usize>,
    pub tau1: Vec<CMat>,
    pub tau2: Vec<CMat>,
    pub h_w1: Vec<CMat>,
    pub h_w2: Vec<CMat>,
    pub h_v: Vec<CMat>,
}

impl PairData {
    pub fn new(tau1: Vec<CMat>, tau2: Vec<CMat>, h_w1: Vec<CMat>, h_w2: Vec<CMat>, h_v: Vec<CMat>) -> Result<Self> {
        let n = tau1.len();
        if n == 0 || [tau2.len(), h_w1.len(), h_w2.len(), h_v.len()].iter().any(|&l| l != n) {
            return Err(Error::Shape("pair data needs the same positive number of strata everywhere".into()));
        }
        let w1: Vec<usize> = tau1.iter().map(|t| t.ncols()).collect();
        let w2: Vec<usize> = tau2.iter().map(|t| t.ncols()).collect();
        let v: Vec<usize> = tau1.iter().map(|t| t.nrows()).collect();
        for q in 0..n {
            if tau2[q].nrows() != v[q] {
                return Err(Error::Shape(format!("τ₁, τ₂ land in different V at degree {q}")));
            }
            for (h, d, name) in [(&h_w1[q], w1[q], "h^W₁"), (&h_w2[q], w2[q], "h^W₂"), (&h_v[q], v[q], "h^V")] {
                if h.nrows() != d || h.ncols() != d {
                    return Err(Error::Shape(format!("{name} at degree {q} is {}×{}, expected {d}×{d}", h.nrows(), h.ncols())));
                }
            }
        }
        // validates Hermitian positivity
        MetricFamily::new(h_w1.clone())?;
        MetricFamily::new(h_w2.clone())?;
        MetricFamily::new(h_v.clone())?;
        Ok(Self { w1, w2, v, tau1, tau2, h_w1, h_w2, h_v })
    }

    /// Identity metrics.
    pub fn with_unit_metrics(tau1: Vec<CMat>, tau2: Vec<CMat>) -> Result<Self> {
        let h = |ts: &[CMat], rows: bool| -> Vec<CMat> {
            ts.iter().map(|t| linalg::eye(if rows { t.nrows() } else { t.ncols() })).collect()
        };
        let (h1, h2, hv) = (h(&tau1, false), h(&tau2, false), h(&tau1, true));
        Self::new(tau1, tau2, h1, h2, hv)
    }

    pub fn strata(&self) -> usize {
        self.v.len()
    }

    /// `W₁₂ = {(w₁, w₂) : τ₁w₁ = τ₂w₂}` as orthonormal columns in `W₁ ⊕ W₂`.
    pub fn w12_basis(&self, q: usize) -> CMat {
        let m = linalg::hstack(&[&(-&self.tau1[q]), &self.tau2[q]]);
        linalg::null_space(&m, RANK_TOL)
    }

    /// Orthonormal columns spanning `V₁ + V₂ = Im τ₁ + Im τ₂`.
    pub fn image_sum(&self, q: usize) -> CMat {
        linalg::range_space(&linalg::hstack(&[&self.tau1[q], &self.tau2[q]]), RANK_TOL)
    }

    pub fn w12_dim(&self, q: usize) -> usize {
        self.w12_basis(q).ncols()
    }

    pub fn vquot_dim(&self, q: usize) -> usize {
        self.v[q] - self.image_sum(q).ncols()
    }
}

/// Orthogonal decomposition `W_j = K_j ⊕ K_j^⊥` per degree, as column bases.
#[derive(Clone, Debug)]
pub struct KSplitting {
    pub k1: Vec<CMat>,
    pub k1_perp: Vec<CMat>,
    pub k2: Vec<CMat>,
    pub k2_perp: Vec<CMat>,
}

impl KSplitting {
    /// `K_j = Ker τ_j` with its `h^{W_j}`-orthogonal complement.
    pub fn kernels(pd: &PairData) -> Self {
        let split = |tau: &CMat, h: &CMat| {
            let k = linalg::null_space(tau, RANK_TOL);
            let perp = linalg::null_space(&(k.adjoint() * h), RANK_TOL);
            (k, perp)
        };
        let (k1, k1_perp) = pd.tau1.iter().zip(&pd.h_w1).map(|(t, h)| split(t, h)).unzip();
        let (k2, k2_perp) = pd.tau2.iter().zip(&pd.h_w2).map(|(t, h)| split(t, h)).unzip();
        Self { k1, k1_perp, k2, k2_perp }
    }

    /// Rejects splittings that do not span or are not `h`-orthogonal.
    pub fn validate(&self, pd: &PairData) -> Result<()> {
        for q in 0..pd.strata() {
            for (k, perp, h, name) in [
                (&self.k1[q], &self.k1_perp[q], &pd.h_w1[q], "W₁"),
                (&self.k2[q], &self.k2_perp[q], &pd.h_w2[q], "W₂"),
            ] {
                let d = h.nrows();
                if k.nrows() != d || perp.nrows() != d || k.ncols() + perp.ncols() != d {
                    return Err(Error::Shape(format!("K-splitting of {name} at degree {q} has wrong shape")));
                }
                let b = linalg::hstack(&[k, perp]);
                if linalg::rank(&b, RANK_TOL) != d {
                    return Err(Error::InvalidArgument(format!("K-splitting of {name} at degree {q} does not span")));
                }
                let cross = linalg::max_abs(&(k.adjoint() * h * perp));
                let scale = linalg::max_abs(h) * linalg::max_abs(&b).powi(2);
                if cross > 1e-10 * scale.max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "K-splitting of {name} at degree {q} is not orthogonal (cross term {cross:e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which metrics and differential the model complexes carry.
#[derive(Clone, Debug)]
pub enum Variant {
    /// `h^{C⁰₃} = ½h^V ⊕ ½h^V`, `h^{C⁰_j} = h^{W_j} ⊕ ½h^V`, `h^{C¹} = h^V`; differential `∂`.
    Plain,
    /// The same table with `h^W_{R,T}`, `h^V_{R,T}` and differential `R^{−1}∂_T`.
    Scaled { r: f64, t: f64, split: Option<KSplitting> },
}

impl Variant {
    pub fn scaled(r: f64, t: f64) -> Self {
        Variant::Scaled { r, t, split: None }
    }

    /// Factor multiplying `∂`.
    pub fn diff_scale(&self) -> f64 {
        match self {
            Variant::Plain => 1.0,
            Variant::Scaled { r, t, .. } => t.sqrt() * (-t).exp() / (PI.sqrt() * r),
        }
    }
}

/// `(√π/2) R T^{−1/2}`, the weight of `K^⊥` in `h^W_{R,T}`.
pub fn w_scale(r: f64, t: f64) -> f64 {
    0.5 * PI.sqrt() * r / t.sqrt()
}

/// `√π R T^{−1/2}`, the weight of `h^V_{R,T}`.
pub fn v_scale(r: f64, t: f64) -> f64 {
    PI.sqrt() * r / t.sqrt()
}

/// `π^{−1/2} T^{1/2} e^{−T}`.
pub fn partial_t_scale(t: f64) -> f64 {
    t.sqrt() * (-t).exp() / PI.sqrt()
}

/// `h(P_K ·, P_K ·) + s h(P_⊥ ·, P_⊥ ·)` for the splitting `[k, perp]`.
fn split_metric(h: &CMat, k: &CMat, perp: &CMat, s: f64) -> Result<CMat> {
    let b = linalg::hstack(&[k, perp]);
    let binv = linalg::inverse(&b)?;
    let inner = linalg::block_diag(&[&(k.adjoint() * h * k), &(perp.adjoint() * h * perp).scale(s)]);
    Ok(linalg::hermitian_part(&(binv.adjoint() * inner * binv)))
}

/// Metrics `(h^{W₁}, h^{W₂}, h^V)` of the variant, per degree.
pub fn variant_metrics(pd: &PairData, variant: &Variant) -> Result<(Vec<CMat>, Vec<CMat>, Vec<CMat>)> {
    match variant {
        Variant::Plain => Ok((pd.h_w1.clone(), pd.h_w2.clone(), pd.h_v.clone())),
        Variant::Scaled { r, t, split } => {
            if !(*r > 0.0 && *t > 0.0) {
                return Err(Error::InvalidArgument(format!("scaled metrics need R, T > 0, got R = {r}, T = {t}")));
            }
            let default;
            let split = match split {
                Some(s) => {
                    s.validate(pd)?;
                    s
                }
                None => {
                    default = KSplitting::kernels(pd);
                    &default
                }
            };
            let s = w_scale(*r, *t);
            let hw1 = (0..pd.strata())
                .map(|q| split_metric(&pd.h_w1[q], &split.k1[q], &split.k1_perp[q], s))
                .collect::<Result<_>>()?;
            let hw2 = (0..pd.strata())
                .map(|q| split_metric(&pd.h_w2[q], &split.k2[q], &split.k2_perp[q], s))
                .collect::<Result<_>>()?;
            let hv = pd.h_v.iter().map(|h| h.scale(v_scale(*r, *t))).collect();
            Ok((hw1, hw2, hv))
        }
    }
}

/// One of the four complexes `C_j`, `j = 0..3`, on total degrees `0..=n`
/// where `n` is the number of strata. Degree `d` is `C^{0,d} ⊕ C^{1,d−1}`
/// with `C^{0,d} = A^d ⊕ B^d`.
#[derive(Clone, Debug)]
pub struct ModelComplex {
    pub j: usize,
    pub cx: GradedComplex,
    pub metric: MetricFamily,
    /// `(dim A^q, dim B^q, dim V^q)` per stratum.
    pub parts: Vec<(usize, usize, usize)>,
}

impl ModelComplex {
    /// `dim C^{0,d}`, which is also the offset of `C^{1,d−1}` in degree `d`.
    pub fn horizontal_len(&self, d: usize) -> usize {
        self.parts.get(d).map_or(0, |p| p.0 + p.1)
    }

    /// The two-term complex `C^{0,q} → C^{1,q}` of one stratum.
    pub fn stratum(&self, q: usize) -> Result<(GradedComplex, MetricFamily)> {
        let h0 = self.horizontal_len(q);
        let v = self.parts[q].2;
        let d = self.cx.diff()[q].view((self.horizontal_len(q + 1), 0), (v, h0)).into_owned();
        let m = &self.metric.mats();
        let hh = m[q].view((0, 0), (h0, h0)).into_owned();
        let hv = m[q + 1].view((self.horizontal_len(q + 1), self.horizontal_len(q + 1)), (v, v)).into_owned();
        Ok((GradedComplex::two_term(d), MetricFamily::new(vec![hh, hv])?))
    }
}

/// `C(σ₁, σ₂)`: `C^{0,q} = A ⊕ B → C^{1,q} = V`, `(a, b) ↦ s(σ₂ b − σ₁ a)`,
/// with block-diagonal metrics `h_a ⊕ h_b` and `h_v`.
pub fn build_pair_complex(
    sigma1: &[CMat],
    sigma2: &[CMat],
    h_a: &[CMat],
    h_b: &[CMat],
    h_v: &[CMat],
    scale: f64,
) -> Result<(GradedComplex, MetricFamily, Vec<(usize, usize, usize)>)> {
    let n = sigma1.len();
    let parts: Vec<(usize, usize, usize)> =
        (0..n).map(|q| (sigma1[q].ncols(), sigma2[q].ncols(), sigma1[q].nrows())).collect();
    let hor = |d: usize| parts.get(d).map_or(0, |p| p.0 + p.1);
    let ver = |d: usize| if d == 0 { 0 } else { parts[d - 1].2 };
    let dims: Vec<usize> = (0..=n).map(|d| hor(d) + ver(d)).collect();
    let mut diff = Vec::with_capacity(n);
    for d in 0..n {
        let mut m = linalg::zeros(dims[d + 1], dims[d]);
        let (a, b, _) = parts[d];
        let row = hor(d + 1);
        m.view_mut((row, 0), (parts[d].2, a)).copy_from(&(-&sigma1[d]).scale(scale));
        m.view_mut((row, a), (parts[d].2, b)).copy_from(&sigma2[d].scale(scale));
        diff.push(m);
    }
    let mut mats = Vec::with_capacity(n + 1);
    for d in 0..=n {
        let mut blocks: Vec<&CMat> = Vec::new();
        if d < n {
            blocks.push(&h_a[d]);
            blocks.push(&h_b[d]);
        }
        if d > 0 {
            blocks.push(&h_v[d - 1]);
        }
        mats.push(linalg::block_diag(&blocks));
    }
    Ok((GradedComplex::new(dims, diff)?, MetricFamily::new(mats)?, parts))
}

/// The maps `α₁, α₂, β₁, β₂` as total-degree matrices.
#[derive(Clone, Debug)]
pub struct SesMaps {
    pub alpha1: Vec<CMat>,
    pub alpha2: Vec<CMat>,
    pub beta1: Vec<CMat>,
    pub beta2: Vec<CMat>,
}

/// Long exact sequence in fixed class bases, on degrees `3d + i` with
/// `i = 0, 1, 2` for `H^d(C₀)`, `H^d(C₁) ⊕ H^d(C₂)`, `H^d(C₃)`.
#[derive(Clone, Debug)]
pub struct LongExactSequence {
    pub cx: GradedComplex,
    pub metric: MetricFamily,
}

/// All four complexes with the SES maps and the LES.
#[derive(Clone, Debug)]
pub struct ModelComplexSet {
    pub complexes: [ModelComplex; 4],
    pub maps: SesMaps,
    pub frames: [Vec<CMat>; 4],
    pub les: LongExactSequence,
    /// `(dim W₁₂^q, dim V_quot^q)`.
    pub cohomology: Vec<(usize, usize)>,
}

fn identity_maps(dims: &[usize]) -> Vec<CMat> {
    dims.iter().map(|&d| linalg::eye(d)).collect()
}

fn half(hs: &[CMat]) -> Vec<CMat> {
    hs.iter().map(|h| h.scale(0.5)).collect()
}

/// Builds `C₀ … C₃` for the variant.
pub fn build_complexes(pd: &PairData, variant: &Variant) -> Result<[ModelComplex; 4]> {
    let (hw1, hw2, hv) = variant_metrics(pd, variant)?;
    let s = variant.diff_scale();
    let id = identity_maps(&pd.v);
    let hv2 = half(&hv);
    let specs: [(&[CMat], &[CMat], &[CMat], &[CMat]); 4] = [
        (&pd.tau1, &pd.tau2, &hw1, &hw2),
        (&pd.tau1, &id, &hw1, &hv2),
        (&id, &pd.tau2, &hv2, &hw2),
        (&id, &id, &hv2, &hv2),
    ];
    let mut out = Vec::with_capacity(4);
    for (j, (s1, s2, ha, hb)) in specs.into_iter().enumerate() {
        let (cx, metric, parts) = build_pair_complex(s1, s2, ha, hb, &hv, s)?;
        out.push(ModelComplex { j, cx, metric, parts });
    }
    Ok(out.try_into().expect("four complexes"))
}

/// Block-diagonal total-degree map from per-stratum horizontal blocks and
/// the identity on `C^{1,•}`.
fn total_map(src: &ModelComplex, dst: &ModelComplex, hor: &[CMat]) -> Vec<CMat> {
    let n = src.parts.len();
    (0..=n)
        .map(|d| {
            let (rs, cs) = (dst.cx.dims()[d], src.cx.dims()[d]);
            let mut m = linalg::zeros(rs, cs);
            if d < n {
                m.view_mut((0, 0), (hor[d].nrows(), hor[d].ncols())).copy_from(&hor[d]);
            }
            if d > 0 {
                let v = src.parts[d - 1].2;
                m.view_mut((dst.horizontal_len(d), src.horizontal_len(d)), (v, v)).copy_from(&linalg::eye(v));
            }
            m
        })
        .collect()
}

pub fn ses_maps(pd: &PairData, c: &[ModelComplex; 4]) -> SesMaps {
    let n = pd.strata();
    let diag = |a: &CMat, b: &CMat| linalg::block_diag(&[a, b]);
    let a1: Vec<CMat> = (0..n).map(|q| diag(&linalg::eye(pd.w1[q]), &pd.tau2[q])).collect();
    let a2: Vec<CMat> = (0..n).map(|q| diag(&pd.tau1[q], &linalg::eye(pd.w2[q]))).collect();
    let b1: Vec<CMat> = (0..n).map(|q| diag(&pd.tau1[q], &linalg::eye(pd.v[q]))).collect();
    let b2: Vec<CMat> = (0..n).map(|q| diag(&linalg::eye(pd.v[q]), &pd.tau2[q])).collect();
    SesMaps {
        alpha1: total_map(&c[0], &c[1], &a1),
        alpha2: total_map(&c[0], &c[2], &a2),
        beta1: total_map(&c[1], &c[3], &b1),
        beta2: total_map(&c[2], &c[3], &b2),
    }
}

/// Checks `0 → C₀ → C₁ ⊕ C₂ → C₃ → 0` degreewise by ranks and chain-map identities.
pub fn check_ses(c: &[ModelComplex; 4], maps: &SesMaps) -> Result<()> {
    for d in 0..c[0].cx.len() {
        let alpha = linalg::vstack(&[&maps.alpha1[d], &maps.alpha2[d]]);
        let beta = linalg::hstack(&[&(-&maps.beta1[d]), &maps.beta2[d]]);
        let comp = linalg::max_abs(&(&beta * &alpha));
        let (n0, n3) = (c[0].cx.dims()[d], c[3].cx.dims()[d]);
        if comp > 1e-12 || linalg::rank(&alpha, RANK_TOL) != n0 || linalg::rank(&beta, RANK_TOL) != n3 {
            return Err(Error::Internal(format!("short exact sequence fails at degree {d}")));
        }
        if n0 + n3 != c[1].cx.dims()[d] + c[2].cx.dims()[d] {
            return Err(Error::Internal(format!("dimensions of the short exact sequence disagree at degree {d}")));
        }
        if d + 1 < c[0].cx.len() {
            let lhs1 = &c[1].cx.diff()[d] * &maps.alpha1[d];
            let rhs1 = &maps.alpha1[d + 1] * &c[0].cx.diff()[d];
            let lhs3 = &c[3].cx.diff()[d] * &maps.beta1[d];
            let rhs3 = &maps.beta1[d + 1] * &c[1].cx.diff()[d];
            if linalg::max_abs(&(lhs1 - rhs1)) > 1e-12 || linalg::max_abs(&(lhs3 - rhs3)) > 1e-12 {
                return Err(Error::Internal(format!("SES maps are not chain maps at degree {d}")));
            }
        }
    }
    Ok(())
}

/// Class representatives of `H^d(C)`: harmonic for the identity metric.
fn frame_of(cx: &GradedComplex) -> Result<Vec<CMat>> {
    Ok(CohomologyFrame::new(cx)?.reps)
}

/// Class coordinates of cocycles `z` (columns) in the frame `reps`.
fn coords(reps: &CMat, z: &CMat) -> CMat {
    reps.adjoint() * z
}

/// LES differentials in the class bases of `frames`.
fn les_maps(c: &[ModelComplex; 4], maps: &SesMaps, frames: &[Vec<CMat>; 4]) -> Result<Vec<CMat>> {
    let n = c[0].cx.len();
    let mut diff = Vec::with_capacity(3 * n);
    for d in 0..n {
        let r0 = &frames[0][d];
        let a = linalg::vstack(&[&coords(&frames[1][d], &(&maps.alpha1[d] * r0)), &coords(&frames[2][d], &(&maps.alpha2[d] * r0))]);
        let b = linalg::hstack(&[
            &(-coords(&frames[3][d], &(&maps.beta1[d] * &frames[1][d]))),
            &coords(&frames[3][d], &(&maps.beta2[d] * &frames[2][d])),
        ]);
        diff.push(a);
        diff.push(b);
        if d + 1 < n {
            diff.push(connecting_map(c, maps, frames, d)?);
        }
    }
    Ok(diff)
}

/// `δ: H^d(C₃) → H^{d+1}(C₀)`: lift through `β₂ − β₁`, differentiate, pull back along `α`.
fn connecting_map(c: &[ModelComplex; 4], maps: &SesMaps, frames: &[Vec<CMat>; 4], d: usize) -> Result<CMat> {
    let z = &frames[3][d];
    let beta = linalg::hstack(&[&(-&maps.beta1[d]), &maps.beta2[d]]);
    let y = linalg::lstsq(&beta, z)?;
    let n1 = c[1].cx.dims()[d];
    let y1 = y.rows(0, n1).into_owned();
    let y2 = y.rows(n1, y.nrows() - n1).into_owned();
    let dy = linalg::vstack(&[&(&c[1].cx.diff()[d] * y1), &(&c[2].cx.diff()[d] * y2)]);
    let alpha = linalg::vstack(&[&maps.alpha1[d + 1], &maps.alpha2[d + 1]]);
    let x = linalg::lstsq(&alpha, &dy)?;
    let resid = linalg::max_abs(&(&alpha * &x - &dy));
    if resid > 1e-9 * linalg::max_abs(&dy).max(1.0) {
        return Err(Error::Internal(format!("connecting map lift failed at degree {d} (residual {resid:e})")));
    }
    Ok(coords(&frames[0][d + 1], &x))
}

/// Gram matrices of the class bases under the complexes' metrics, in LES order.
fn les_metric(c: &[ModelComplex; 4], frames: &[Vec<CMat>; 4]) -> Result<Vec<CMat>> {
    let grams: Vec<Vec<CMat>> = (0..4)
        .map(|j| {
            let hd = hodge::hodge_decompose(&c[j].cx, &c[j].metric)?;
            Ok(CohomologyFrame { reps: frames[j].clone() }.metric(&c[j].metric, &hd))
        })
        .collect::<Result<_>>()?;
    let mut mats = Vec::new();
    for d in 0..c[0].cx.len() {
        mats.push(grams[0][d].clone());
        mats.push(linalg::block_diag(&[&grams[1][d], &grams[2][d]]));
        mats.push(grams[3][d].clone());
    }
    Ok(mats)
}

pub fn build_model_set(pd: &PairData, variant: &Variant) -> Result<ModelComplexSet> {
    let complexes = build_complexes(pd, variant)?;
    let maps = ses_maps(pd, &complexes);
    check_ses(&complexes, &maps)?;
    let frames: [Vec<CMat>; 4] = [
        frame_of(&complexes[0].cx)?,
        frame_of(&complexes[1].cx)?,
        frame_of(&complexes[2].cx)?,
        frame_of(&complexes[3].cx)?,
    ];
    let diff = les_maps(&complexes, &maps, &frames)?;
    let dims: Vec<usize> = (0..complexes[0].cx.len())
        .flat_map(|d| [frames[0][d].ncols(), frames[1][d].ncols() + frames[2][d].ncols(), frames[3][d].ncols()])
        .collect();
    let cx = GradedComplex::new(dims, diff)?;
    let metric = MetricFamily::new(les_metric(&complexes, &frames)?)?;
    let les = LongExactSequence { cx, metric };
    check_les_exact(&les.cx)?;
    let cohomology = (0..pd.strata()).map(|q| (pd.w12_dim(q), pd.vquot_dim(q))).collect();
    Ok(ModelComplexSet { complexes, maps, frames, les, cohomology })
}

fn check_les_exact(cx: &GradedComplex) -> Result<()> {
    for (k, &dim) in cx.dims().iter().enumerate() {
        let rank_in = if k == 0 { 0 } else { linalg::rank(&cx.diff()[k - 1], RANK_TOL) };
        let rank_out = cx.diff().get(k).map_or(0, |d| linalg::rank(d, RANK_TOL));
        if rank_in + rank_out != dim {
            return Err(Error::Internal(format!("long exact sequence not exact at position {k}")));
        }
    }
    Ok(())
}

/// Torsion of a complex that may be entirely zero-dimensional.
fn torsion_scalar(cx: &GradedComplex, h: &MetricFamily) -> Result<f64> {
    if cx.total_dim() == 0 {
        return Ok(0.0);
    }
    Ok(torsion::torsion_point(cx, h)?.scalar())
}

fn exact_torsion_scalar(cx: &GradedComplex, h: &MetricFamily) -> Result<f64> {
    if cx.total_dim() == 0 {
        return Ok(0.0);
    }
    Ok(torsion::torsion_exact_sequence(cx, h, None)?.scalar())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GluingReport {
    /// `𝒯₀, 𝒯₁, 𝒯₂, 𝒯₃, 𝒯_H`.
    pub per_term_torsions: [f64; 5],
    pub combo: f64,
    pub residual: f64,
}

/// `𝒯₀ − 𝒯₁ − 𝒯₂ + 𝒯₃ + 𝒯_H` at a point base.
pub fn gluing_check(pd: &PairData, variant: &Variant) -> Result<GluingReport> {
    let set = build_model_set(pd, variant)?;
    let mut t = [0.0; 5];
    for (j, c) in set.complexes.iter().enumerate() {
        t[j] = torsion_scalar(&c.cx, &c.metric)?;
    }
    t[4] = exact_torsion_scalar(&set.les.cx, &set.les.metric)?;
    let combo = t[0] - t[1] - t[2] + t[3] + t[4];
    Ok(GluingReport { per_term_torsions: t, combo, residual: combo.abs() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TorusGluingReport {
    pub g: usize,
    /// `∫_{𝕋²}` of the two-form part of the combination.
    pub integral: f64,
    pub residual: f64,
    /// `∫_{𝕋²}` of the two-form part of `𝒯₀, 𝒯₁, 𝒯₂, 𝒯₃, 𝒯_H` separately.
    pub term_integrals: [f64; 5],
    /// Largest pointwise two-form coefficient of the combination.
    pub max_pointwise: f64,
    pub warnings: Vec<String>,
}

/// Gluing combination over `𝕋²`: the metrics of `pd_at(x)` vary, the maps
/// must not. Returns `|∫ combo|` over the torus for the two-form part.
///
/// On flat trivial bundles the two-form part of each single torsion form
/// integrates to zero as well, so the integrals of the individual terms are
/// reported alongside the combination.
pub fn gluing_check_torus(pd_at: &dyn Fn(&[f64]) -> Result<PairData>, g: usize, variant: &Variant) -> Result<TorusGluingReport> {
    let base = pd_at(&[0.0, 0.0])?;
    let set = build_model_set(&base, variant)?;
    let n_pts = g * g;
    let mut sets = Vec::with_capacity(n_pts);
    for idx in 0..n_pts {
        let x = [(idx % g) as f64 / g as f64, (idx / g) as f64 / g as f64];
        let pd = pd_at(&x)?;
        for q in 0..pd.strata() {
            if linalg::max_abs(&(&pd.tau1[q] - &base.tau1[q])) > 0.0 || linalg::max_abs(&(&pd.tau2[q] - &base.tau2[q])) > 0.0 {
                return Err(Error::InvalidArgument("the maps τ₁, τ₂ must be constant over the base".into()));
            }
        }
        let cs = build_complexes(&pd, variant)?;
        let les = les_metric(&cs, &set.frames)?;
        sets.push((cs, les));
    }
    let mut combo = vec![0.0; n_pts];
    let mut warnings = Vec::new();
    let sign = [1.0, -1.0, -1.0, 1.0];
    let mut term_integrals = [0.0; 5];
    for j in 0..5 {
        let cx = if j < 4 { set.complexes[j].cx.clone() } else { set.les.cx.clone() };
        if cx.total_dim() == 0 {
            continue;
        }
        let fam = FamilyOverGrid::from_fn(cx.clone(), 2, g, |x| {
            let (ix, iy) = ((x[0] * g as f64).round() as usize % g, (x[1] * g as f64).round() as usize % g);
            let (cs, les) = &sets[iy * g + ix];
            if j < 4 {
                Ok(cs[j].metric.clone())
            } else {
                MetricFamily::new(les.clone())
            }
        })?;
        for (idx, slot) in combo.iter_mut().enumerate() {
            let sample = omega_from_family(&fam, idx)?;
            if let Some(w) = sample.warning {
                if warnings.len() < 5 {
                    warnings.push(format!("term {j}, point {idx}: {w}"));
                }
            }
            let tf = torsion::torsion_form(&cx, fam.metric(idx), &sample.omega)?;
            *slot += if j < 4 { sign[j] } else { 1.0 } * tf.coeff(0b11);
            term_integrals[j] += tf.coeff(0b11) / n_pts as f64;
        }
    }
    let integral: f64 = combo.iter().sum::<f64>() / n_pts as f64;
    let max_pointwise = combo.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    Ok(TorusGluingReport { g, integral, residual: integral.abs(), term_integrals, max_pointwise, warnings })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AltSumReport {
    pub lhs: f64,
    pub strata: Vec<f64>,
    pub rhs: f64,
    pub diff: f64,
}

/// Torsion of the total complex `C_j` against `Σ_q (−1)^q 𝒯(C^{•,q}_j)`.
pub fn bigraded_alt_sum_check(pd: &PairData, variant: &Variant, j: usize) -> Result<AltSumReport> {
    if j > 3 {
        return Err(Error::InvalidArgument(format!("model complexes are indexed 0..3, got {j}")));
    }
    let cs = build_complexes(pd, variant)?;
    let c = &cs[j];
    let lhs = torsion_scalar(&c.cx, &c.metric)?;
    let strata: Vec<f64> = (0..pd.strata())
        .map(|q| {
            let (cx, h) = c.stratum(q)?;
            torsion_scalar(&cx, &h)
        })
        .collect::<Result<_>>()?;
    let rhs: f64 = strata.iter().enumerate().map(|(q, t)| if q % 2 == 0 { *t } else { -t }).sum();
    Ok(AltSumReport { lhs, strata, rhs, diff: (lhs - rhs).abs() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FiltrationReport {
    pub a_rt: f64,
    pub t_h: f64,
    /// `𝒯_hor^k` for `k = 0..=n`.
    pub hor: Vec<f64>,
    /// `𝒯_vert^k` for `k = 0..=n`; entry 0 is always 0.
    pub vert: Vec<f64>,
    /// Torsion of the truncation at `k − 1` for `k = 0..=n + 1`.
    pub truncated: Vec<f64>,
    pub residual: f64,
}

/// Orthonormal basis (w.r.t. `h`) of the `h`-orthogonal complement of `span`.
fn orth_complement(span: &CMat, h: &CMat) -> CMat {
    let d = h.nrows();
    let perp = if span.ncols() == 0 { linalg::eye(d) } else { linalg::null_space(&(span.adjoint() * h), RANK_TOL) };
    linalg::orthonormalize(&perp, h)
}

/// Pieces of the filtration diagrams, all in class bases of the scaled model.
struct Filtration<'a> {
    pd: &'a PairData,
    set: ModelComplexSet,
    hw: Vec<CMat>,
    hv: Vec<CMat>,
    a: f64,
}

impl Filtration<'_> {
    fn strata(&self) -> usize {
        self.pd.strata()
    }

    /// `(basis Q ⊂ V^k, metric a^{−2} Q†h^V Q, map H^k(C₃) → V_quot)`.
    fn vquot(&self, k: usize) -> (CMat, CMat, CMat) {
        let q = orth_complement(&self.pd.image_sum(k), &self.hv[k]);
        let metric = (q.adjoint() * &self.hv[k] * &q).scale(self.a.powi(-2));
        // a class of C₃ in degree k is (v, v) ⊕ 0; read off v
        let reps = &self.set.frames[3][k];
        let v = reps.rows(0, self.pd.v[k]).into_owned();
        let map = q.adjoint() * &self.hv[k] * v;
        (q, linalg::hermitian_part(&metric), map)
    }

    /// `(basis B ⊂ W₁ ⊕ W₂, metric B†h^W_{R,T}B)` of `W₁₂^k`.
    fn w12(&self, k: usize) -> (CMat, CMat) {
        let b = self.pd.w12_basis(k);
        let metric = b.adjoint() * &self.hw[k] * &b;
        (b, linalg::hermitian_part(&metric))
    }

    fn les_index(&self, d: usize, i: usize) -> usize {
        3 * d + i
    }

    /// Truncation of the LES after `V^k`, closed by `V^k_quot`; `None` is empty.
    fn truncated(&self, k: Option<usize>) -> Result<f64> {
        let Some(k) = k else { return Ok(0.0) };
        let les = &self.set.les;
        if k >= self.strata() {
            return exact_torsion_scalar(&les.cx, &les.metric);
        }
        let top = self.les_index(k, 2);
        let mut dims: Vec<usize> = les.cx.dims()[..=top].to_vec();
        let mut diff: Vec<CMat> = les.cx.diff()[..top].to_vec();
        let mut mats: Vec<CMat> = les.metric.mats()[..=top].to_vec();
        let (_, qm, map) = self.vquot(k);
        dims.push(map.nrows());
        diff.push(map);
        mats.push(qm);
        exact_torsion_scalar(&GradedComplex::new(dims, diff)?, &MetricFamily::new(mats)?)
    }

    /// `0 → W₁₂^k → H^k(C₁) ⊕ H^k(C₂) → H^k(C₃) → V^k_quot → 0`.
    fn hor(&self, k: usize) -> Result<f64> {
        let les = &self.set.les;
        let (b, bm) = self.w12(k);
        let c0 = &self.set.complexes[0];
        // W₁₂ element (w₁, w₂) as a cocycle of C₀ in degree k
        let mut rep = linalg::zeros(c0.cx.dims()[k], b.ncols());
        rep.view_mut((0, 0), (b.nrows(), b.ncols())).copy_from(&b);
        let maps = &self.set.maps;
        let emb = linalg::vstack(&[
            &coords(&self.set.frames[1][k], &(&maps.alpha1[k] * &rep)),
            &coords(&self.set.frames[2][k], &(&maps.alpha2[k] * &rep)),
        ]);
        let (_, qm, qmap) = self.vquot(k);
        let i1 = self.les_index(k, 1);
        let dims = vec![b.ncols(), les.cx.dims()[i1], les.cx.dims()[i1 + 1], qmap.nrows()];
        let diff = vec![emb, les.cx.diff()[i1].clone(), qmap];
        let mats = vec![bm, les.metric.mats()[i1].clone(), les.metric.mats()[i1 + 1].clone(), qm];
        exact_torsion_scalar(&GradedComplex::new(dims, diff)?, &MetricFamily::new(mats)?)
    }

    /// `0 → V^{k−1}_quot → H^k(C₀) → W₁₂^k → 0`.
    fn vert(&self, k: usize) -> Result<f64> {
        let les = &self.set.les;
        let (q, qm, _) = self.vquot(k - 1);
        // v ∈ V_quot as the class of (v, v) in H^{k−1}(C₃), then δ
        let c3 = &self.set.complexes[3];
        let mut z = linalg::zeros(c3.cx.dims()[k - 1], q.ncols());
        let nv = self.pd.v[k - 1];
        z.view_mut((0, 0), (nv, q.ncols())).copy_from(&q);
        z.view_mut((nv, 0), (nv, q.ncols())).copy_from(&q);
        let class = coords(&self.set.frames[3][k - 1], &z);
        let delta = &les.cx.diff()[self.les_index(k - 1, 2)];
        let iota = delta * class;
        let h_idx = self.les_index(k, 0);
        let hmetric = les.metric.mats()[h_idx].clone();
        let (dims, diff, mats) = if k < self.strata() {
            let (b, bm) = self.w12(k);
            let reps = &self.set.frames[0][k];
            let horizontal = reps.rows(0, b.nrows()).into_owned();
            let proj = linalg::lstsq(&b, &horizontal)?;
            (vec![q.ncols(), les.cx.dims()[h_idx], b.ncols()], vec![iota, proj], vec![qm, hmetric, bm])
        } else {
            (vec![q.ncols(), les.cx.dims()[h_idx]], vec![iota], vec![qm, hmetric])
        };
        exact_torsion_scalar(&GradedComplex::new(dims, diff)?, &MetricFamily::new(mats)?)
    }
}

/// Splits `𝒯_H` of the scaled model into the torsions of the horizontal rows
/// and vertical columns of the truncation diagrams and returns the residual of
/// `𝒯_H = Σ_k (−1)^k 𝒯_hor^k − Σ_k (−1)^k 𝒯_vert^k`. `a_rt` defaults to
/// `a_{R,T}` from the profile.
pub fn mv_filtration_decompose(pd: &PairData, r: f64, t: f64, split: Option<KSplitting>, a_rt: Option<f64>) -> Result<FiltrationReport> {
    let variant = Variant::Scaled { r, t, split };
    let (hw1, hw2, hv) = variant_metrics(pd, &variant)?;
    let hw = (0..pd.strata()).map(|q| linalg::block_diag(&[&hw1[q], &hw2[q]])).collect();
    let a = a_rt.unwrap_or_else(|| profile::a_rt(r, t));
    let f = Filtration { pd, set: build_model_set(pd, &variant)?, hw, hv, a };
    let n = pd.strata();
    let t_h = f.truncated(Some(n))?;
    let hor: Vec<f64> = (0..n).map(|k| f.hor(k)).collect::<Result<_>>()?;
    let mut vert = vec![0.0];
    for k in 1..=n {
        vert.push(f.vert(k)?);
    }
    let truncated: Vec<f64> = (0..=n + 1).map(|k| f.truncated(k.checked_sub(1))).collect::<Result<_>>()?;
    let sgn = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let rhs: f64 = hor.iter().enumerate().map(|(k, v)| sgn(k) * v).sum::<f64>()
        - vert.iter().enumerate().map(|(k, v)| sgn(k) * v).sum::<f64>();
    Ok(FiltrationReport { a_rt: a, t_h, hor, vert, truncated, residual: (t_h - rhs).abs() })
}

/// Euler characteristic of the LES, which must vanish.
pub fn les_euler_characteristic(set: &ModelComplexSet) -> i64 {
    set.les.cx.euler_characteristic()
}
