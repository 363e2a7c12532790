//! Hermitian band matrices: Sturm counts, bisection for selected eigenvalues,
//! inverse iteration for eigenvectors and banded LU solves.
//!
//! The discretized first-order operators are far too large for dense solves
//! but have a handful of nonzero diagonals, and only a few eigenvalues near a
//! window are ever needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64, ZERO};

/// Extra vectors carried by the subspace iteration beyond the window count.
const SUBSPACE_GUARD: usize = 4;
const MAX_SUBSPACE_ITERATIONS: usize = 200;
/// Ritz residual target relative to `‖A‖`.
const RITZ_TOL: f64 = 1e-13;
/// Residual still accepted when the iteration stagnates.
const STAGNATION_TOL: f64 = 1e-10;

/// Hermitian matrix stored by its lower band: `low[i * (p + 1) + k] = A[i][i − k]`.
#[derive(Clone, Debug)]
pub struct BandedHermitian {
    n: usize,
    p: usize,
    low: Vec<C64>,
    norm: f64,
}

impl BandedHermitian {
    /// Builds from `(i, j, value)` entries with `i ≥ j`; the upper triangle is
    /// implied. Repeated entries are summed.
    pub fn from_lower_entries(n: usize, entries: &[(usize, usize, C64)]) -> Result<Self> {
        let mut p = 0;
        for &(i, j, _) in entries {
            if i < j || i >= n {
                return Err(Error::Shape(format!("entry ({i}, {j}) outside the lower triangle of size {n}")));
            }
            p = p.max(i - j);
        }
        let mut low = vec![ZERO; n * (p + 1)];
        for &(i, j, v) in entries {
            low[i * (p + 1) + (i - j)] += v;
        }
        for i in 0..n {
            let d = &mut low[i * (p + 1)];
            if d.im.abs() > 1e-12 * d.re.abs().max(1.0) {
                return Err(Error::NotHermitian(format!("diagonal entry {i} has imaginary part {}", d.im)));
            }
            d.im = 0.0;
        }
        let mut m = Self { n, p, low, norm: 0.0 };
        m.norm = m.gershgorin().1.abs().max(m.gershgorin().0.abs());
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.p
    }

    /// `A[i][j]` for any `i, j`.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i >= j {
            if i - j > self.p {
                ZERO
            } else {
                self.low[i * (self.p + 1) + (i - j)]
            }
        } else {
            self.get(j, i).conj()
        }
    }

    pub fn to_dense(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn matvec(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.n);
        for i in 0..self.n {
            for k in 0..=self.p.min(i) {
                let a = self.low[i * (self.p + 1) + k];
                let j = i - k;
                y[i] += a * x[j];
                if k > 0 {
                    y[j] += a.conj() * x[i];
                }
            }
        }
        y
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut radius = vec![0.0; self.n];
        for i in 0..self.n {
            for k in 1..=self.p.min(i) {
                let a = self.low[i * (self.p + 1) + k].norm();
                radius[i] += a;
                radius[i - k] += a;
            }
        }
        (0..self.n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let d = self.low[i * (self.p + 1)].re;
            (lo.min(d - radius[i]), hi.max(d + radius[i]))
        })
    }

    pub fn pivmin(&self) -> f64 {
        f64::EPSILON * self.norm.max(f64::MIN_POSITIVE) * 4.0
    }

    /// Number of eigenvalues strictly below `sigma`, from the inertia of the
    /// unpivoted `LDLᴴ` factorization of `A − σ`. Accurate to a few `ε‖A‖`
    /// away from 0; near 0 the pivots of the first-order operators alternate
    /// between `O(σ)` and `O(1/σ)` and the count degrades.
    pub fn count_below(&self, sigma: f64) -> usize {
        let (n, p) = (self.n, self.p);
        let pivmin = self.pivmin();
        let mut l = vec![ZERO; n * (p + 1)];
        let mut d = vec![0.0; n];
        let mut neg = 0;
        for i in 0..n {
            let jlo = i.saturating_sub(p);
            for j in jlo..i {
                let mut s = self.low[i * (p + 1) + (i - j)];
                for k in jlo.max(j.saturating_sub(p))..j {
                    s -= l[i * (p + 1) + (i - k)] * d[k] * l[j * (p + 1) + (j - k)].conj();
                }
                l[i * (p + 1) + (i - j)] = s / d[j];
            }
            let mut di = self.low[i * (p + 1)].re - sigma;
            for k in jlo..i {
                di -= l[i * (p + 1) + (i - k)].norm_sqr() * d[k];
            }
            if di.abs() < pivmin {
                di = -pivmin;
            }
            if di < 0.0 {
                neg += 1;
            }
            d[i] = di;
        }
        neg
    }

    /// Eigenvalues with indices `lo..hi` in ascending order, by bisection.
    pub fn eigenvalues_by_index(&self, lo: usize, hi: usize) -> Vec<f64> {
        let (glo, ghi) = self.gershgorin();
        let pad = 1e-12 * self.norm.max(1.0);
        (lo..hi.min(self.n))
            .map(|k| {
                let (mut a, mut b) = (glo - pad, ghi + pad);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if self.count_below(mid) > k {
                        b = mid;
                    } else {
                        a = mid;
                    }
                    if b - a <= 2.0 * f64::EPSILON * (a.abs().max(b.abs())) + self.pivmin() {
                        break;
                    }
                }
                0.5 * (a + b)
            })
            .collect()
    }

    /// Eigenvalues in `[a, b)`.
    pub fn eigenvalues_in(&self, a: f64, b: f64) -> Vec<f64> {
        let (i, j) = (self.count_below(a), self.count_below(b));
        self.eigenvalues_by_index(i, j)
    }

    /// Eigenvectors for the given eigenvalues by inverse iteration. Vectors of
    /// eigenvalues closer than `cluster` are orthogonalized against each other.
    pub fn eigenvectors(&self, eigenvalues: &[f64], cluster: f64) -> Result<Vec<CVec>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut out: Vec<CVec> = Vec::with_capacity(eigenvalues.len());
        for (idx, &lam) in eigenvalues.iter().enumerate() {
            let shift = lam + self.pivmin() * 16.0;
            let lu = BandLu::factor(self, shift)?;
            let mut x = CVec::from_fn(self.n, |_, _| C64::new(rng.random::<f64>() - 0.5, 0.0));
            let partners: Vec<usize> = (0..idx).filter(|&j| (eigenvalues[j] - lam).abs() <= cluster).collect();
            for _ in 0..6 {
                for &j in &partners {
                    let v = &out[j];
                    let c = v.dotc(&x);
                    x -= v * c;
                }
                x = lu.solve(&x);
                let nrm = x.norm();
                if !(nrm.is_finite() && nrm > 0.0) {
                    return Err(Error::Numerical(format!("inverse iteration failed near {lam}")));
                }
                x /= C64::new(nrm, 0.0);
            }
            for &j in &partners {
                let v = &out[j];
                let c = v.dotc(&x);
                x -= v * c;
            }
            let nrm = x.norm();
            x /= C64::new(nrm, 0.0);
            out.push(x);
        }
        Ok(out)
    }

    /// Eigenpairs with eigenvalues in `[a, b)`. The count comes from Sturm
    /// sequences at the window ends; the pairs from shift-invert subspace
    /// iteration about the window centre followed by Rayleigh–Ritz, which
    /// keeps eigenvalues near 0 accurate to a few `ε‖A‖`.
    pub fn eigenpairs_in(&self, a: f64, b: f64) -> Result<(Vec<f64>, Vec<CVec>)> {
        let k = self.count_below(b).saturating_sub(self.count_below(a));
        if k == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        let n = self.n;
        let m = (k + SUBSPACE_GUARD).min(n);
        let half = 0.5 * (b - a);
        // an off-centre shift keeps the factorization away from exact eigenvalues
        let shift = 0.5 * (a + b) + 0.0137 * half;
        let lu = BandLu::factor(self, shift)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x = CMat::from_fn(n, m, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let tol = RITZ_TOL * self.norm.max(1.0);
        let mut best: Option<(f64, Vec<f64>, Vec<CVec>)> = None;
        for _ in 0..MAX_SUBSPACE_ITERATIONS {
            for j in 0..m {
                let col = lu.solve(&x.column(j).into_owned());
                x.set_column(j, &col);
            }
            let q = x.clone().qr().q();
            let aq = CMat::from_columns(&(0..m).map(|j| self.matvec(&q.column(j).into_owned())).collect::<Vec<_>>());
            let (theta, w) = crate::linalg::herm_eig(&crate::linalg::hermitian_part(&(q.adjoint() * &aq)));
            x = &q * &w;
            let ax = aq * &w;
            // unconverged guard vectors can leave spurious Ritz values inside
            // the window, so only the k in-window pairs with smallest residual count
            let mut inside: Vec<(f64, f64, CVec)> = theta
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= a && t < b)
                .map(|(j, &t)| {
                    let v = x.column(j).into_owned();
                    ((ax.column(j) - &v * C64::new(t, 0.0)).norm(), t, v)
                })
                .collect();
            if inside.len() >= k {
                inside.sort_by(|p, q| p.0.total_cmp(&q.0));
                inside.truncate(k);
                inside.sort_by(|p, q| p.1.total_cmp(&q.1));
                let worst = inside.iter().fold(0.0f64, |w, p| w.max(p.0));
                let (vals, vecs) = inside.into_iter().map(|(_, t, v)| (t, v)).unzip();
                if worst <= tol {
                    return Ok((vals, vecs));
                }
                if best.as_ref().is_none_or(|(r, _, _)| worst < *r) {
                    best = Some((worst, vals, vecs));
                }
            }
        }
        match best {
            Some((r, vals, vecs)) if r <= STAGNATION_TOL * self.norm.max(1.0) => Ok((vals, vecs)),
            _ => Err(Error::Numerical(format!("subspace iteration on [{a}, {b}) did not converge to {k} pairs"))),
        }
    }

    /// Solves `(A − σ) x = b`.
    pub fn solve_shifted(&self, sigma: f64, b: &CVec) -> Result<CVec> {
        Ok(BandLu::factor(self, sigma)?.solve(b))
    }
}

/// LU factorization with partial pivoting of a band matrix with `kl` lower and
/// `ku = 2 kl` upper diagonals (fill-in included).
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i` holds columns `i − kl ..= i + ku`.
    rows: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn at(&self, i: usize, j: usize) -> C64 {
        self.rows[i * self.width() + (j + self.kl - i)]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        let w = self.width();
        &mut self.rows[i * w + (j + self.kl - i)]
    }

    pub fn factor(a: &BandedHermitian, sigma: f64) -> Result<Self> {
        let shift = C64::new(sigma, 0.0);
        Self::factor_with(a.n, a.p, a.pivmin(), |i, j| if i == j { a.get(i, j) - shift } else { a.get(i, j) })
    }

    /// Factors a general matrix of bandwidth `p` given entrywise; pivots below
    /// `tiny` are replaced by `tiny`.
    pub fn factor_with(n: usize, p: usize, tiny: f64, get: impl Fn(usize, usize) -> C64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Shape("empty band matrix".into()));
        }
        let (kl, ku) = (p, 2 * p);
        let mut lu = BandLu { n, kl, ku, rows: vec![ZERO; n * (kl + ku + 1)], piv: vec![0; n] };
        for i in 0..n {
            for j in i.saturating_sub(p)..(i + p + 1).min(n) {
                *lu.at_mut(i, j) = get(i, j);
            }
        }
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut best = k;
            for i in k + 1..=last {
                if lu.at(i, k).norm() > lu.at(best, k).norm() {
                    best = i;
                }
            }
            lu.piv[k] = best;
            let jmax = (k + ku).min(n - 1);
            if best != k {
                for j in k..=jmax {
                    let (x, y) = (lu.at(k, j), lu.at(best, j));
                    *lu.at_mut(k, j) = y;
                    *lu.at_mut(best, j) = x;
                }
            }
            if lu.at(k, k).norm() < tiny {
                *lu.at_mut(k, k) = C64::new(tiny, 0.0);
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last {
                let m = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = m;
                if m != ZERO {
                    for j in k + 1..=jmax {
                        let v = lu.at(k, j);
                        *lu.at_mut(i, j) -= m * v;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &CVec) -> CVec {
        let n = self.n;
        let mut x = b.clone();
        for k in 0..n {
            let pk = self.piv[k];
            if pk != k {
                x.swap_rows(k, pk);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.at(i, k) * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + self.ku).min(n - 1) {
                s -= self.at(k, j) * x[j];
            }
            x[k] = s / self.at(k, k);
        }
        x
    }
}
