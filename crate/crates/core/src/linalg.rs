//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_hermitian(m: &CMat, rel: f64) -> bool {
    frob(&(m - m.adjoint())) <= rel * frob(m).max(f64::MIN_POSITIVE)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
/// The input is symmetrized first.
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(m));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = zeros(n, n);
    for (j, &i) in idx.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn herm_eigvals(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = nalgebra::SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Lower Cholesky factor `L` with `h = L L†`. Fails if `h` is not positive definite.
pub fn cholesky(h: &CMat) -> Result<CMat> {
    if h.nrows() == 0 {
        return Ok(zeros(0, 0));
    }
    nalgebra::Cholesky::new(hermitian_part(h))
        .map(|ch| ch.l())
        .ok_or_else(|| Error::NotPositiveDefinite("cholesky failed".into()))
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &CMat) -> CMat {
    let n = l.nrows();
    let mut inv = eye(n);
    if n > 0 && !l.solve_lower_triangular_mut(&mut inv) {
        // singular factor; callers only pass Cholesky factors of SPD matrices
        inv.fill(C64::new(f64::NAN, 0.0));
    }
    inv
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    if m.nrows() == 0 {
        return Ok(zeros(0, 0));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular matrix".into()))
}

/// Singular values, descending.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank(m: &CMat, rel: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(&smax) if smax == 0.0 => 0,
        Some(&smax) => s.iter().filter(|&&x| x > rel * smax.max(1.0)).count(),
    }
}

/// Orthonormal basis (columns) of the null space of `m`.
pub fn null_space(m: &CMat, rel: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    if m.nrows() == 0 {
        return eye(n);
    }
    let (vals, vecs) = herm_eig(&(m.adjoint() * m));
    let top = vals.last().copied().unwrap_or(0.0).max(1.0);
    let cols: Vec<usize> = (0..n).filter(|&i| vals[i] <= rel * top).collect();
    select_columns(&vecs, &cols)
}

/// Orthonormal basis (columns) of the column space of `m`.
pub fn range_space(m: &CMat, rel: f64) -> CMat {
    let r = m.nrows();
    if r == 0 || m.ncols() == 0 {
        return zeros(r, 0);
    }
    let (vals, vecs) = herm_eig(&(m * m.adjoint()));
    let top = vals.last().copied().unwrap_or(0.0).max(1.0);
    let cols: Vec<usize> = (0..r).filter(|&i| vals[i] > rel * top).collect();
    select_columns(&vecs, &cols)
}

pub fn select_columns(m: &CMat, cols: &[usize]) -> CMat {
    let mut out = zeros(m.nrows(), cols.len());
    for (j, &i) in cols.iter().enumerate() {
        out.set_column(j, &m.column(i));
    }
    out
}

pub fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, off), (rows, b.ncols())).copy_from(*b);
        off += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&CMat]) -> CMat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((off, 0), (b.nrows(), cols)).copy_from(*b);
        off += b.nrows();
    }
    out
}

pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(*b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Least-squares solution of `a x = b` via the pseudo-inverse.
pub fn lstsq(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.ncols() == 0 {
        return Ok(zeros(0, b.ncols()));
    }
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12 * svd.singular_values.max().max(1.0))
        .map_err(|e| Error::Numerical(format!("least squares: {e}")))
}

/// Matrix square root and inverse square root of a Hermitian positive definite matrix.
pub fn sqrt_and_inv_sqrt(h: &CMat) -> Result<(CMat, CMat)> {
    let (vals, vecs) = herm_eig(h);
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::NotPositiveDefinite("non-positive eigenvalue".into()));
    }
    let s = CMat::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|v| c(v.sqrt()))));
    let si = CMat::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| c(1.0 / v.sqrt())),
    ));
    Ok((&vecs * s * vecs.adjoint(), &vecs * si * vecs.adjoint()))
}

/// Gram-Schmidt orthonormalization of the columns of `m` w.r.t. the metric `h`
/// (`<x, y> = y† h x`), dropping numerically dependent columns.
pub fn orthonormalize(m: &CMat, h: &CMat) -> CMat {
    let mut cols: Vec<CVec> = Vec::new();
    for j in 0..m.ncols() {
        let mut v: CVec = m.column(j).into_owned();
        for _ in 0..2 {
            for u in &cols {
                let p = (u.adjoint() * h * &v)[(0, 0)];
                v -= u * p;
            }
        }
        let nrm = (v.adjoint() * h * &v)[(0, 0)].re.max(0.0).sqrt();
        let scale = m.column(j).norm().max(1e-300);
        if nrm > 1e-10 * scale {
            cols.push(v / c(nrm));
        }
    }
    let mut out = zeros(m.nrows(), cols.len());
    for (j, v) in cols.iter().enumerate() {
        out.set_column(j, v);
    }
    out
}
