//! Superconnection calculus for a metrized complex over a point or a torus grid:
//! `𝔛_t = (√t/2)(∂* − ∂) + ½ω`, the matrix function `f′(z) = (1 + 2z²)e^{z²}`
//! of Grassmann-valued matrices, the even form `f^∧` and the odd form `f(∇, h)`.
//!
//! Forms with values in `End(W)` live in a graded tensor product, so moving a
//! form of degree `p` past an odd endomorphism costs `(−1)^p`. We evaluate in
//! the ordinary tensor product through `α⊗A ↦ α ε^{deg α} A` with
//! `ε = (−1)^N`, which is an algebra isomorphism and leaves even-degree
//! coefficients unchanged.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grassmann::{degree, GrassmannForm};
use crate::hodge::{self, GradedComplex, HodgeData, MetricFamily};
use crate::linalg::{self, CMat, C64};

/// Divided difference `exp[x₀, …, x_k]`, stable for coincident or clustered points.
pub fn divided_difference_exp(xs: &[f64]) -> f64 {
    let k = xs.len();
    assert!(k > 0, "empty divided difference");
    let (mut imin, mut imax) = (0, 0);
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[imin] {
            imin = i;
        }
        if x > xs[imax] {
            imax = i;
        }
    }
    let spread = xs[imax] - xs[imin];
    if spread <= 1.0 {
        return dd_exp_series(xs);
    }
    let without = |skip: usize| -> Vec<f64> {
        xs.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &x)| x).collect()
    };
    (divided_difference_exp(&without(imin)) - divided_difference_exp(&without(imax))) / spread
}

/// Taylor expansion about the mean: `e^c Σ_j h_j(x − c)/(k + j)!`, with `h_j`
/// the complete homogeneous symmetric polynomials. For spread at most 1 the
/// `j`-th term is below `1/(k! j!)`.
fn dd_exp_series(xs: &[f64]) -> f64 {
    let k = xs.len() - 1;
    let c = xs.iter().sum::<f64>() / xs.len() as f64;
    let ys: Vec<f64> = xs.iter().map(|x| x - c).collect();
    const TERMS: usize = 40;
    // h[j] over the variables processed so far
    let mut h = [0.0f64; TERMS];
    h[0] = 1.0;
    for &y in &ys {
        for j in 1..TERMS {
            h[j] += y * h[j - 1];
        }
    }
    let mut fact = (1..=k).fold(1.0, |a, i| a * i as f64);
    let mut sum = 0.0;
    for (j, hj) in h.iter().enumerate() {
        if j > 0 {
            fact *= (k + j) as f64;
        }
        // no early exit: symmetric point sets make single terms vanish
        sum += hj / fact;
    }
    c.exp() * sum
}

/// Matrix of Grassmann scalars: `entries[i][j]` has `2^m` coefficients.
type GMat = Vec<Vec<Vec<C64>>>;

fn gscalar_mul_acc(acc: &mut [C64], a: &[C64], b: &[C64], w: C64) {
    let n = a.len();
    for i in 0..n {
        if a[i] == linalg::ZERO {
            continue;
        }
        for j in 0..n {
            if i & j != 0 || b[j] == linalg::ZERO {
                continue;
            }
            acc[i | j] += a[i] * b[j] * w * crate::grassmann::shuffle_sign(i, j);
        }
    }
}

fn gmat_from_form(f: &GrassmannForm) -> GMat {
    let d = f.d();
    let nc = f.n_coeffs();
    (0..d)
        .map(|i| (0..d).map(|j| (0..nc).map(|mask| f.coeff(mask)[(i, j)]).collect()).collect())
        .collect()
}

fn form_from_gmat(g: &GMat, m: usize) -> GrassmannForm {
    let d = g.len();
    let mut f = GrassmannForm::zero(m, d);
    for mask in 0..(1 << m) {
        let a = CMat::from_fn(d, d, |i, j| g[i][j][mask]);
        f.set_coeff(mask, a);
    }
    f
}

/// `e^{B + S}` for `B = diag(lam)` and a nilpotent soul `S` (no degree-zero part),
/// through the terminating Duhamel expansion with exponential divided differences.
fn exp_diag_plus_soul(lam: &[f64], s: &GMat, m: usize) -> GMat {
    let d = lam.len();
    let nc = 1 << m;
    let mut out: GMat = vec![vec![vec![linalg::ZERO; nc]; d]; d];
    for i in 0..d {
        out[i][i][0] = linalg::c(lam[i].exp());
    }
    // paths i0 → i1 → … → ik with accumulated soul product
    fn walk(
        lam: &[f64],
        s: &GMat,
        path: &mut Vec<usize>,
        prod: Vec<C64>,
        depth_left: usize,
        out: &mut GMat,
    ) {
        let d = lam.len();
        let last = *path.last().unwrap();
        for next in 0..d {
            let entry = &s[last][next];
            if entry.iter().all(|z| *z == linalg::ZERO) {
                continue;
            }
            let mut np = vec![linalg::ZERO; prod.len()];
            gscalar_mul_acc(&mut np, &prod, entry, linalg::ONE);
            if np.iter().all(|z| *z == linalg::ZERO) {
                continue;
            }
            path.push(next);
            let xs: Vec<f64> = path.iter().map(|&i| lam[i]).collect();
            let w = divided_difference_exp(&xs);
            let target = &mut out[path[0]][next];
            for (t, v) in target.iter_mut().zip(&np) {
                *t += v * w;
            }
            if depth_left > 1 {
                walk(lam, s, path, np, depth_left - 1, out);
            }
            path.pop();
        }
    }
    if m == 0 {
        return out;
    }
    for i0 in 0..d {
        let mut unit = vec![linalg::ZERO; nc];
        unit[0] = linalg::ONE;
        let mut path = vec![i0];
        walk(lam, s, &mut path, unit, m, &mut out);
    }
    out
}

/// `f′(X) = (1 + 2X²) e^{X²}` for a Grassmann-valued matrix whose body is
/// skew-Hermitian (the form must be expressed in an orthonormal frame).
pub fn matfun_fprime(x: &GrassmannForm) -> Result<GrassmannForm> {
    let b = x.body();
    let skew = linalg::frob(&(b + b.adjoint()));
    if skew > 1e-10 * linalg::frob(b).max(1.0) {
        return Err(Error::InvalidArgument(format!("body is not skew-Hermitian: ‖B + B†‖ = {skew:e}")));
    }
    let m = x.m();
    let x2 = x * x;
    let (lam, u) = linalg::herm_eig(x2.body());
    let ud = u.adjoint();
    let soul_eig = x2.soul().conjugate_by(&ud, &u);
    let e = exp_diag_plus_soul(&lam, &gmat_from_form(&soul_eig), m);
    let e_form = form_from_gmat(&e, m).conjugate_by(&u, &ud);
    let two_x2 = x2.scale(linalg::c(2.0));
    Ok(&e_form + &(&two_x2 * &e_form))
}

/// `𝔛_t = (√t/2)(∂* − ∂) + ½ω` on the total space, in the original frame.
pub fn curly_x(cx: &GradedComplex, h: &MetricFamily, omega: &GrassmannForm, t: f64) -> Result<GrassmannForm> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let n = cx.total_dim();
    if omega.d() != n {
        return Err(Error::Shape(format!("ω has size {}, complex has total dimension {n}", omega.d())));
    }
    let d = cx.total_diff();
    let adj = hodge::adjoint(cx, h)?;
    let off = cx.offsets();
    let mut dstar = linalg::zeros(n, n);
    for (k, a) in adj.iter().enumerate() {
        dstar.view_mut((off[k], off[k + 1]), (a.nrows(), a.ncols())).copy_from(a);
    }
    let body = (dstar - d).scale(0.5 * t.sqrt());
    let mut x = omega.scale(linalg::c(0.5));
    x.set_coeff(0, body);
    Ok(x)
}

/// Degree of each basis vector of the total space.
fn degree_labels(dims: &[usize]) -> Vec<usize> {
    dims.iter().enumerate().flat_map(|(k, &d)| std::iter::repeat(k).take(d)).collect()
}

/// `φ` on a coefficient of form degree `2p`: multiplication by `(2πi)^{-p}`.
pub fn phi_factor(form_degree: usize) -> C64 {
    debug_assert!(form_degree % 2 == 0);
    let p = (form_degree / 2) as i32;
    C64::new(0.0, 2.0 * PI).powi(-p)
}

/// Precomputed data for evaluating `f^∧(A″, h_t)` at many `t`.
///
/// Works in the orthonormal eigenbasis of the Laplacian, where the body of
/// `𝔛_t²` is `−(t/4) diag(μ)` and only the soul depends on `ω`.
#[derive(Clone, Debug)]
pub struct FHatEvaluator {
    m: usize,
    mu: Vec<f64>,
    weight: Vec<f64>,
    /// `K = ∂'† − ∂'` in the eigenbasis.
    k_eig: CMat,
    /// Twisted `ω` in the eigenbasis.
    omega_eig: GrassmannForm,
    /// `¼ ω̂²`, independent of `t`.
    omega_sq_quarter: GrassmannForm,
    pub threshold: f64,
}

impl FHatEvaluator {
    pub fn new(cx: &GradedComplex, h: &MetricFamily, omega: &GrassmannForm) -> Result<Self> {
        let hd = hodge::hodge_decompose(cx, h)?;
        Self::with_hodge(cx, h, &hd, omega)
    }

    pub fn with_hodge(cx: &GradedComplex, h: &MetricFamily, hd: &HodgeData, omega: &GrassmannForm) -> Result<Self> {
        let n = cx.total_dim();
        if omega.d() != n {
            return Err(Error::Shape(format!("ω has size {}, complex has total dimension {n}", omega.d())));
        }
        let labels = degree_labels(cx.dims());
        // harmonic eigenvalues are zeroed so they cannot leak into the large-t tail
        let mu: Vec<f64> =
            hd.eigenvalues.iter().flatten().map(|&v| if v <= hd.threshold { 0.0 } else { v }).collect();
        let weight: Vec<f64> = labels
            .iter()
            .map(|&k| if k % 2 == 0 { 0.5 * k as f64 } else { -0.5 * k as f64 })
            .collect();
        // h-orthonormal eigenvectors: columns of V with V† h V = 1, so V^{-1} = V† h.
        let refs: Vec<&CMat> = hd.eigenvectors.iter().collect();
        let v = linalg::block_diag(&refs);
        let ht = h.total();
        let v_inv = v.adjoint() * &ht;
        let d = cx.total_diff();
        let off = cx.offsets();
        let mut dstar = linalg::zeros(n, n);
        for (k, a) in hd.adjoint.iter().enumerate() {
            dstar.view_mut((off[k], off[k + 1]), (a.nrows(), a.ncols())).copy_from(a);
        }
        let k_eig = &v_inv * (dstar - d) * &v;
        let eps = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            labels.iter().map(|&k| linalg::c(if k % 2 == 0 { 1.0 } else { -1.0 })),
        ));
        let twisted = omega.map_coeffs(|mask, a| if degree(mask) % 2 == 1 { &eps * a } else { a.clone() });
        let omega_eig = twisted.conjugate_by(&v_inv, &v);
        let omega_sq_quarter = (&omega_eig * &omega_eig).scale(linalg::c(0.25));
        Ok(Self { m: omega.m(), mu, weight, k_eig, omega_eig, omega_sq_quarter, threshold: hd.threshold })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn laplacian_eigenvalues(&self) -> &[f64] {
        &self.mu
    }

    /// Raw complex coefficients of `φ tr[(−1)^N (N/2) f′(𝔛_t)]` for every mask.
    pub fn eval_complex(&self, t: f64) -> Vec<C64> {
        let n = self.mu.len();
        let nc = 1 << self.m;
        let lam: Vec<f64> = self.mu.iter().map(|&u| -0.25 * t * u).collect();
        let mut out = vec![linalg::ZERO; nc];
        if self.m == 0 {
            let s: f64 = (0..n).map(|i| self.weight[i] * (1.0 + 2.0 * lam[i]) * lam[i].exp()).sum();
            out[0] = linalg::c(s);
            return out;
        }
        // soul of 𝔛_t² = (√t/4)(K ω̂ + ω̂ K) + ¼ ω̂²
        let st = 0.25 * t.sqrt();
        let kform = GrassmannForm::from_body(self.m, self.k_eig.clone());
        let cross = &(&kform * &self.omega_eig) + &(&self.omega_eig * &kform);
        let soul = &cross.scale(linalg::c(st)) + &self.omega_sq_quarter;
        let soul = soul.soul();
        let s = gmat_from_form(&soul);
        let e = exp_diag_plus_soul(&lam, &s, self.m);
        // diagonal of (1 + 2X²) E with X² = diag(lam) + S
        for i in 0..n {
            if self.weight[i] == 0.0 {
                continue;
            }
            let mut yii: Vec<C64> = e[i][i].iter().map(|z| z * (1.0 + 2.0 * lam[i])).collect();
            for j in 0..n {
                gscalar_mul_acc(&mut yii, &s[i][j], &e[j][i], linalg::c(2.0));
            }
            for (o, y) in out.iter_mut().zip(&yii) {
                *o += y * self.weight[i];
            }
        }
        for (mask, o) in out.iter_mut().enumerate() {
            let p = degree(mask);
            if p % 2 == 1 {
                *o = linalg::ZERO;
            } else {
                *o *= phi_factor(p);
            }
        }
        out
    }
}

/// Even scalar form `f^∧(A″, h_t)`; odd-degree coefficients are dropped
/// (they vanish identically) and imaginary parts are discarded after the check
/// in [`f_hat_complex`].
pub fn f_hat(cx: &GradedComplex, h: &MetricFamily, omega: &GrassmannForm, t: f64) -> Result<GrassmannForm> {
    let raw = f_hat_complex(cx, h, omega, t)?;
    Ok(real_scalar_form(omega.m(), &raw))
}

/// Complex coefficients of `f^∧`, for reality checks.
pub fn f_hat_complex(cx: &GradedComplex, h: &MetricFamily, omega: &GrassmannForm, t: f64) -> Result<Vec<C64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    Ok(FHatEvaluator::new(cx, h, omega)?.eval_complex(t))
}

/// Direct (non-eigenbasis) evaluation through [`curly_x`] and [`matfun_fprime`];
/// slower, used to cross-check the evaluator.
pub fn f_hat_direct(cx: &GradedComplex, h: &MetricFamily, omega: &GrassmannForm, t: f64) -> Result<Vec<C64>> {
    let x = curly_x(cx, h, omega, t)?;
    let labels = degree_labels(cx.dims());
    let n = labels.len();
    // orthonormal frame: A' = L† A L^{-†}
    let chols: Vec<CMat> = h.mats().iter().map(linalg::cholesky).collect::<Result<_>>()?;
    let refs: Vec<&CMat> = chols.iter().collect();
    let l = linalg::block_diag(&refs);
    let l_inv = linalg::lower_inverse(&l);
    let eps = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        labels.iter().map(|&k| linalg::c(if k % 2 == 0 { 1.0 } else { -1.0 })),
    ));
    let x_on = x.conjugate_by(&l.adjoint(), &l_inv.adjoint());
    let x_tw = x_on.map_coeffs(|mask, a| if degree(mask) % 2 == 1 { &eps * a } else { a.clone() });
    let y = matfun_fprime(&x_tw)?;
    let w = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        labels.iter().map(|&k| linalg::c(if k % 2 == 0 { 0.5 * k as f64 } else { -0.5 * k as f64 })),
    ));
    Ok((0..y.n_coeffs())
        .map(|mask| {
            let p = degree(mask);
            if p % 2 == 1 {
                linalg::ZERO
            } else {
                (&w * y.coeff(mask)).trace() * phi_factor(p)
            }
        })
        .collect())
}

pub(crate) fn real_scalar_form(m: usize, coeffs: &[C64]) -> GrassmannForm {
    let mut f = GrassmannForm::zero(m, 1);
    for (mask, z) in coeffs.iter().enumerate() {
        f.set_coeff(mask, CMat::from_element(1, 1, linalg::c(z.re)));
    }
    f
}

/// Branch of `i^{1/2}` used for `(2πi)^{±1/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Principal,
    Opposite,
}

/// Complex coefficients of `Σ_k (−1)^k (2πi)^{1/2} tr f(½(2πi)^{-1/2} ω_k)` with
/// `f(x) = x e^{x²}`; `omegas[k]` is the connection form on degree `k`.
pub fn f_odd_complex(omegas: &[GrassmannForm], branch: Branch) -> Result<Vec<C64>> {
    let m = omegas.first().map_or(0, GrassmannForm::m);
    let nc = 1 << m;
    let mut root = C64::from_polar((2.0 * PI).sqrt(), PI / 4.0);
    if branch == Branch::Opposite {
        root = -root;
    }
    let mut out = vec![linalg::ZERO; nc];
    for (k, om) in omegas.iter().enumerate() {
        if om.m() != m {
            return Err(Error::Shape("connection forms over different bases".into()));
        }
        if om.d() == 0 {
            continue;
        }
        if linalg::max_abs(om.body()) > 0.0 {
            return Err(Error::InvalidArgument("connection form must have no degree-zero part".into()));
        }
        let x = om.scale(root.inv() * 0.5);
        let x2 = &x * &x;
        // x e^{x²} = Σ_j x^{2j+1}/j!, terminating since x is nilpotent
        let mut term = x.clone();
        let mut acc = x.clone();
        let mut j = 0usize;
        loop {
            j += 1;
            term = (&term * &x2).scale(linalg::c(1.0 / j as f64));
            if term.max_abs() == 0.0 || 2 * j + 1 > m {
                break;
            }
            acc = &acc + &term;
        }
        let tr = acc.trace();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (mask, o) in out.iter_mut().enumerate() {
            *o += tr.scalar(mask) * root * sign;
        }
    }
    Ok(out)
}

/// Odd real form `f(∇, h)` (alternating sum over degrees), principal branch.
pub fn f_odd(omegas: &[GrassmannForm]) -> Result<GrassmannForm> {
    let m = omegas.first().map_or(0, GrassmannForm::m);
    let raw = f_odd_complex(omegas, Branch::Principal)?;
    Ok(real_scalar_form(m, &raw))
}

/// Splits a total-space block-diagonal form into its per-degree blocks.
pub fn split_by_degree(omega: &GrassmannForm, dims: &[usize]) -> Vec<GrassmannForm> {
    let off = hodge::offsets(dims);
    (0..dims.len())
        .map(|k| {
            let (a, d) = (off[k], dims[k]);
            omega.map_coeffs(|_, c| c.view((a, a), (d, d)).into_owned())
        })
        .collect()
}
