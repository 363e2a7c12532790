//! Finite-dimensional Hodge theory for graded complexes with Hermitian metrics.
//!
//! Everything is computed in an orthonormal frame: with `h_k = L_k L_k†` the
//! differential becomes `∂'_k = L_{k+1}† ∂_k L_k^{-†}`, its adjoint is the
//! conjugate transpose and the Laplacian is an ordinary Hermitian matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};

/// Relative threshold for counting a Laplacian eigenvalue as zero.
pub const KERNEL_REL: f64 = 1e-9;

/// A finite chain complex `0 → W⁰ → W¹ → … → Wⁿ → 0`.
#[derive(Clone, Debug)]
pub struct GradedComplex {
    dims: Vec<usize>,
    diff: Vec<CMat>,
}

impl GradedComplex {
    /// `diff[k]` maps degree `k` to degree `k+1` and has shape `dims[k+1] × dims[k]`.
    pub fn new(dims: Vec<usize>, diff: Vec<CMat>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Shape("complex needs at least one degree".into()));
        }
        if diff.len() + 1 != dims.len() {
            return Err(Error::Shape(format!(
                "{} degrees need {} differentials, got {}",
                dims.len(),
                dims.len() - 1,
                diff.len()
            )));
        }
        for (k, d) in diff.iter().enumerate() {
            if d.nrows() != dims[k + 1] || d.ncols() != dims[k] {
                return Err(Error::Shape(format!(
                    "∂_{k} is {}×{}, expected {}×{}",
                    d.nrows(),
                    d.ncols(),
                    dims[k + 1],
                    dims[k]
                )));
            }
        }
        for k in 0..diff.len().saturating_sub(1) {
            let prod = &diff[k + 1] * &diff[k];
            let scale = linalg::max_abs(&diff[k + 1]).max(1.0) * linalg::max_abs(&diff[k]).max(1.0);
            let v = linalg::max_abs(&prod);
            if v > 1e-12 * scale {
                return Err(Error::NotAComplex { degree: k, value: v });
            }
        }
        Ok(Self { dims, diff })
    }

    /// Two-term complex `W⁰ → W¹`.
    pub fn two_term(d: CMat) -> Self {
        let dims = vec![d.ncols(), d.nrows()];
        Self { dims, diff: vec![d] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn diff(&self) -> &[CMat] {
        &self.diff
    }

    /// Number of degrees (top degree plus one).
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total_dim() == 0
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        offsets(&self.dims)
    }

    /// Differential as one block matrix on the total space.
    pub fn total_diff(&self) -> CMat {
        let off = self.offsets();
        let n = self.total_dim();
        let mut m = linalg::zeros(n, n);
        for (k, d) in self.diff.iter().enumerate() {
            m.view_mut((off[k + 1], off[k]), (d.nrows(), d.ncols())).copy_from(d);
        }
        m
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.dims
            .iter()
            .enumerate()
            .map(|(k, &d)| if k % 2 == 0 { d as i64 } else { -(d as i64) })
            .sum()
    }

    /// Dual complex: degrees reversed, differentials transposed (conjugate).
    pub fn dual(&self) -> Self {
        let n = self.dims.len();
        let dims: Vec<usize> = self.dims.iter().rev().copied().collect();
        let diff = (0..n - 1).map(|k| self.diff[n - 2 - k].adjoint()).collect();
        Self { dims, diff }
    }
}

pub(crate) fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(dims.len() + 1);
    let mut acc = 0;
    off.push(0);
    for &d in dims {
        acc += d;
        off.push(acc);
    }
    off
}

/// Per-degree Hermitian metrics.
#[derive(Clone, Debug)]
pub struct MetricFamily {
    mats: Vec<CMat>,
}

impl MetricFamily {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        for (k, h) in mats.iter().enumerate() {
            if h.nrows() != h.ncols() {
                return Err(Error::Shape(format!("metric in degree {k} is not square")));
            }
            if h.nrows() == 0 {
                continue;
            }
            let asym = linalg::frob(&(h - h.adjoint()));
            if asym > 1e-12 * linalg::frob(h) {
                return Err(Error::NotHermitian(format!("degree {k}: ‖h − h†‖ = {asym:e}")));
            }
            let vals = linalg::herm_eigvals(h);
            if vals[0] <= 0.0 {
                return Err(Error::NotPositiveDefinite(format!(
                    "degree {k}: minimum eigenvalue {:e}",
                    vals[0]
                )));
            }
        }
        Ok(Self { mats })
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self { mats: dims.iter().map(|&d| linalg::eye(d)).collect() }
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    pub fn total(&self) -> CMat {
        let refs: Vec<&CMat> = self.mats.iter().collect();
        linalg::block_diag(&refs)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { mats: self.mats.iter().map(|h| h.scale(s)).collect() }
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(Self { mats: self.mats.iter().map(linalg::inverse).collect::<Result<_>>()? })
    }

    fn check_against(&self, cx: &GradedComplex) -> Result<()> {
        if self.mats.len() != cx.dims.len() {
            return Err(Error::Shape(format!(
                "{} metric blocks for {} degrees",
                self.mats.len(),
                cx.dims.len()
            )));
        }
        for (k, (h, &d)) in self.mats.iter().zip(&cx.dims).enumerate() {
            if h.nrows() != d {
                return Err(Error::Shape(format!("metric in degree {k} has size {}, expected {d}", h.nrows())));
            }
        }
        Ok(())
    }
}

/// `∂*_k = h_k^{-1} ∂_k† h_{k+1}`.
pub fn adjoint(cx: &GradedComplex, h: &MetricFamily) -> Result<Vec<CMat>> {
    h.check_against(cx)?;
    let mut out = Vec::with_capacity(cx.diff.len());
    for (k, d) in cx.diff.iter().enumerate() {
        let hk_inv = linalg::inverse(&h.mats[k])
            .map_err(|_| Error::NotPositiveDefinite(format!("degree {k}")))?;
        out.push(hk_inv * d.adjoint() * &h.mats[k + 1]);
    }
    Ok(out)
}

/// Hodge data of a metrized complex.
#[derive(Clone, Debug)]
pub struct HodgeData {
    dims: Vec<usize>,
    /// Lower Cholesky factors of the metric.
    chol: Vec<CMat>,
    chol_inv: Vec<CMat>,
    /// Differential in the orthonormal frame.
    diff_on: Vec<CMat>,
    /// Adjoint blocks in the original frame.
    pub adjoint: Vec<CMat>,
    /// Laplacians in the original frame (`h`-self-adjoint).
    pub laplacians: Vec<CMat>,
    /// Eigenvalues of `Δ_k`, ascending.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Eigenvectors of `Δ_k` in the original frame, `h_k`-orthonormal columns.
    pub eigenvectors: Vec<CMat>,
    /// Same eigenvectors in the orthonormal frame (unitary columns).
    eigvecs_on: Vec<CMat>,
    pub betti: Vec<usize>,
    /// Absolute threshold below which eigenvalues count as zero.
    pub threshold: f64,
}

/// Closed set of Laplacian eigenvalues to project onto.
#[derive(Clone, Debug)]
pub enum SpectralSet {
    Interval(f64, f64),
    Points(Vec<f64>),
}

impl SpectralSet {
    fn contains(&self, x: f64, tol: f64) -> bool {
        match self {
            SpectralSet::Interval(a, b) => x >= a - tol && x <= b + tol,
            SpectralSet::Points(p) => p.iter().any(|&y| (x - y).abs() <= tol),
        }
    }
}

impl HodgeData {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Nonzero eigenvalues of `Δ_k`.
    pub fn nonzero_eigenvalues(&self, k: usize) -> Vec<f64> {
        self.eigenvalues[k].iter().copied().filter(|&v| v > self.threshold).collect()
    }

    /// `h`-orthonormal basis of the harmonic space in degree `k` (columns).
    pub fn harmonic_basis(&self, k: usize) -> CMat {
        let cols: Vec<usize> =
            (0..self.dims[k]).filter(|&i| self.eigenvalues[k][i] <= self.threshold).collect();
        linalg::select_columns(&self.eigenvectors[k], &cols)
    }

    /// Rank of `∂_k` under the shared threshold.
    pub fn rank_diff(&self, k: usize) -> usize {
        let d = &self.diff_on[k];
        if d.ncols() == 0 || d.nrows() == 0 {
            return 0;
        }
        linalg::herm_eigvals(&(d.adjoint() * d)).iter().filter(|&&v| v > self.threshold).count()
    }

    fn from_on(&self, k: usize, p_on: &CMat) -> CMat {
        // P = L^{-†} P' L†
        self.chol_inv[k].adjoint() * p_on * self.chol[k].adjoint()
    }

    fn per_degree_total(&self, blocks: Vec<CMat>) -> CMat {
        let refs: Vec<&CMat> = blocks.iter().collect();
        linalg::block_diag(&refs)
    }

    /// `h`-orthogonal projector onto `Ker D`, as a block-diagonal matrix on the total space.
    pub fn harmonic_projector(&self) -> CMat {
        self.spectral_projector(&SpectralSet::Points(vec![0.0]))
    }

    /// `h`-orthogonal projector onto `im ∂`.
    pub fn image_projector(&self) -> CMat {
        let blocks = (0..self.dims.len())
            .map(|k| {
                if k == 0 {
                    return linalg::zeros(self.dims[0], self.dims[0]);
                }
                let q = range_above(&self.diff_on[k - 1], self.threshold);
                self.from_on(k, &(&q * q.adjoint()))
            })
            .collect();
        self.per_degree_total(blocks)
    }

    /// `h`-orthogonal projector onto `im ∂*`.
    pub fn coimage_projector(&self) -> CMat {
        let n = self.dims.len();
        let blocks = (0..n)
            .map(|k| {
                if k + 1 == n {
                    return linalg::zeros(self.dims[k], self.dims[k]);
                }
                let q = range_above(&self.diff_on[k].adjoint(), self.threshold);
                self.from_on(k, &(&q * q.adjoint()))
            })
            .collect();
        self.per_degree_total(blocks)
    }

    /// Projector onto the span of Laplacian eigenvectors with eigenvalue in `set`.
    pub fn spectral_projector(&self, set: &SpectralSet) -> CMat {
        let blocks = (0..self.dims.len())
            .map(|k| {
                let cols: Vec<usize> = (0..self.dims[k])
                    .filter(|&i| {
                        let lam = self.eigenvalues[k][i];
                        let lam = if lam <= self.threshold { 0.0 } else { lam };
                        set.contains(lam, self.threshold)
                    })
                    .collect();
                let u = linalg::select_columns(&self.eigvecs_on[k], &cols);
                self.from_on(k, &(&u * u.adjoint()))
            })
            .collect();
        self.per_degree_total(blocks)
    }

    /// Total-space Laplacian.
    pub fn total_laplacian(&self) -> CMat {
        self.per_degree_total(self.laplacians.clone())
    }

    /// Total-space `D = ∂ + ∂*`.
    pub fn total_dirac(&self, cx: &GradedComplex) -> CMat {
        let off = offsets(&self.dims);
        let n = *off.last().unwrap();
        let mut m = linalg::zeros(n, n);
        for (k, d) in cx.diff.iter().enumerate() {
            m.view_mut((off[k + 1], off[k]), (d.nrows(), d.ncols())).copy_from(d);
            let a = &self.adjoint[k];
            m.view_mut((off[k], off[k + 1]), (a.nrows(), a.ncols())).copy_from(a);
        }
        m
    }

    /// `log det′ Δ_k`.
    pub fn log_det_prime(&self, k: usize) -> f64 {
        self.nonzero_eigenvalues(k).iter().map(|v| v.ln()).sum()
    }

    /// Smallest and largest nonzero Laplacian eigenvalues over all degrees.
    pub fn nonzero_range(&self) -> Option<(f64, f64)> {
        let all: Vec<f64> = (0..self.dims.len()).flat_map(|k| self.nonzero_eigenvalues(k)).collect();
        if all.is_empty() {
            return None;
        }
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all.iter().copied().fold(0.0, f64::max);
        Some((lo, hi))
    }
}

/// Orthonormal basis of the range of `m`: eigenvectors of `m m†` above `thr`.
fn range_above(m: &CMat, thr: f64) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return linalg::zeros(m.nrows(), 0);
    }
    let (vals, vecs) = linalg::herm_eig(&(m * m.adjoint()));
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > thr).collect();
    linalg::select_columns(&vecs, &cols)
}

/// Hodge decomposition data of `(cx, h)`.
pub fn hodge_decompose(cx: &GradedComplex, h: &MetricFamily) -> Result<HodgeData> {
    h.check_against(cx)?;
    let n = cx.dims.len();
    let mut chol = Vec::with_capacity(n);
    let mut chol_inv = Vec::with_capacity(n);
    for (k, hk) in h.mats.iter().enumerate() {
        let l = linalg::cholesky(hk).map_err(|_| Error::NotPositiveDefinite(format!("degree {k}")))?;
        chol_inv.push(linalg::lower_inverse(&l));
        chol.push(l);
    }
    let diff_on: Vec<CMat> = cx
        .diff
        .iter()
        .enumerate()
        .map(|(k, d)| chol[k + 1].adjoint() * d * chol_inv[k].adjoint())
        .collect();
    let adjoint = adjoint(cx, h)?;
    let mut lap_on = Vec::with_capacity(n);
    for k in 0..n {
        let mut l = linalg::zeros(cx.dims[k], cx.dims[k]);
        if k + 1 < n {
            l += diff_on[k].adjoint() * &diff_on[k];
        }
        if k > 0 {
            l += &diff_on[k - 1] * diff_on[k - 1].adjoint();
        }
        lap_on.push(linalg::hermitian_part(&l));
    }
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigvecs_on = Vec::with_capacity(n);
    for l in &lap_on {
        let (v, u) = linalg::herm_eig(l);
        eigenvalues.push(v);
        eigvecs_on.push(u);
    }
    let top = eigenvalues.iter().flat_map(|v| v.last().copied()).fold(0.0f64, f64::max);
    let scale = if top > KERNEL_REL { top } else { 1.0 };
    let threshold = KERNEL_REL * scale;
    let eigenvectors: Vec<CMat> =
        (0..n).map(|k| chol_inv[k].adjoint() * &eigvecs_on[k]).collect();
    let laplacians: Vec<CMat> =
        (0..n).map(|k| chol_inv[k].adjoint() * &lap_on[k] * chol[k].adjoint()).collect();
    let betti = eigenvalues.iter().map(|v| v.iter().filter(|&&x| x <= threshold).count()).collect();
    Ok(HodgeData {
        dims: cx.dims.clone(),
        chol,
        chol_inv,
        diff_on,
        adjoint,
        laplacians,
        eigenvalues,
        eigenvectors,
        eigvecs_on,
        betti,
        threshold,
    })
}

/// Betti numbers by rank–nullity of the differential, using the same threshold
/// as the harmonic count.
pub fn betti_by_rank(hd: &HodgeData) -> Vec<usize> {
    let n = hd.dims.len();
    let ranks: Vec<usize> = (0..n.saturating_sub(1)).map(|k| hd.rank_diff(k)).collect();
    (0..n)
        .map(|k| {
            let out = if k + 1 < n { ranks[k] } else { 0 };
            let inc = if k > 0 { ranks[k - 1] } else { 0 };
            hd.dims[k] - out - inc
        })
        .collect()
}

/// Outcome of evaluating one of the projection estimates.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EstimateRecord {
    pub hypothesis: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Both projection estimates, in the metric norm and in the graph norm `‖·‖₁`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProjectionEstimates {
    pub naive: EstimateRecord,
    pub refined_w: EstimateRecord,
    pub refined_v: EstimateRecord,
    pub naive_graph: EstimateRecord,
    pub refined_w_graph: EstimateRecord,
    pub refined_v_graph: EstimateRecord,
}

impl ProjectionEstimates {
    /// True when no estimate with satisfied hypotheses failed.
    pub fn consistent(&self) -> bool {
        [&self.naive, &self.refined_w, &self.refined_v, &self.naive_graph, &self.refined_w_graph, &self.refined_v_graph]
            .iter()
            .all(|r| !r.hypothesis || r.holds)
    }
}

/// Evaluates the naive estimate (`‖Dw‖² ≤ αβ ⇒ ‖w − P^{[0,β]}w‖² ≤ α`) and the
/// refined one (`‖∂w‖², ‖∂*v‖² ≤ αγ`, `‖w − v‖² ≤ β` ⇒ both distances to
/// `P^{[0,γ]}` at most `3α + 2β`), each in `‖·‖` and in `‖·‖₁`.
pub fn check_projection_estimates(
    cx: &GradedComplex,
    hd: &HodgeData,
    h: &MetricFamily,
    w: &CVec,
    v: &CVec,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> ProjectionEstimates {
    let ht = h.total();
    let d = cx.total_diff();
    let dirac = hd.total_dirac(cx);
    let dstar = &dirac - &d;
    let nrm2 = |x: &CVec| (x.adjoint() * &ht * x)[(0, 0)].re.max(0.0);
    let nrm2_graph = |x: &CVec| nrm2(x) + nrm2(&(&dirac * x));
    let slack = |a: f64| 1e-10 * (1.0 + a.abs());

    let p_beta = hd.spectral_projector(&SpectralSet::Interval(0.0, beta));
    let p_gamma = hd.spectral_projector(&SpectralSet::Interval(0.0, gamma));

    let naive_with = |n2: &dyn Fn(&CVec) -> f64| {
        let hyp = n2(&(&dirac * w)) <= alpha * beta;
        let lhs = n2(&(w - &p_beta * w));
        EstimateRecord { hypothesis: hyp, lhs, rhs: alpha, holds: lhs <= alpha + slack(alpha) }
    };
    let refined_with = |n2: &dyn Fn(&CVec) -> f64, x: &CVec| {
        let hyp = n2(&(&d * w)) <= alpha * gamma
            && n2(&(&dstar * v)) <= alpha * gamma
            && n2(&(w - v)) <= beta;
        let lhs = n2(&(x - &p_gamma * x));
        let rhs = 3.0 * alpha + 2.0 * beta;
        EstimateRecord { hypothesis: hyp, lhs, rhs, holds: lhs <= rhs + slack(rhs) }
    };
    ProjectionEstimates {
        naive: naive_with(&nrm2),
        refined_w: refined_with(&nrm2, w),
        refined_v: refined_with(&nrm2, v),
        naive_graph: naive_with(&nrm2_graph),
        refined_w_graph: refined_with(&nrm2_graph, w),
        refined_v_graph: refined_with(&nrm2_graph, v),
    }
}

/// Pairing `y† h x` on the total space.
pub fn inner(h: &CMat, x: &CVec, y: &CVec) -> C64 {
    (y.adjoint() * h * x)[(0, 0)]
}
