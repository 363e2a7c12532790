//! Seeded generators for random complexes, metrics and pair data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hodge::{GradedComplex, MetricFamily};
use crate::linalg::{self, CMat, C64};
use crate::mv_model::PairData;

/// Counter-based stream: case `index` of the named suite `seed`.
pub fn case_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box–Muller; the 1 − u keeps the logarithm finite
    let (u, v): (f64, f64) = (rng.random(), rng.random());
    (-2.0 * (1.0 - u).ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn complex_gaussian(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| C64::new(gaussian(rng), gaussian(rng)) * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn unitary(rng: &mut impl Rng, n: usize) -> CMat {
    if n == 0 {
        return linalg::zeros(0, 0);
    }
    complex_gaussian(rng, n, n).qr().q()
}

/// Invertible matrix with singular values log-uniform in `[1, cond]`.
pub fn conditioned(rng: &mut impl Rng, n: usize, cond: f64) -> CMat {
    let (u, v) = (unitary(rng, n), unitary(rng, n));
    let s = CMat::from_fn(n, n, |i, j| if i == j { linalg::c(cond.powf(rng.random::<f64>())) } else { linalg::c(0.0) });
    u * s * v.adjoint()
}

/// Hermitian positive definite matrix with eigenvalues log-uniform in `[1/√cond, √cond]`.
pub fn spd(rng: &mut impl Rng, n: usize, cond: f64) -> CMat {
    let u = unitary(rng, n);
    let lo = cond.sqrt().recip();
    let d = CMat::from_fn(n, n, |i, j| if i == j { linalg::c(lo * cond.powf(rng.random::<f64>())) } else { linalg::c(0.0) });
    linalg::hermitian_part(&(&u * d * u.adjoint()))
}

/// Random complex with the given dimensions and ranks `ranks[k] = rank ∂_k`.
/// The differential is a standard partial identity conjugated by bases of
/// condition at most `cond`.
pub fn complex_with_ranks(rng: &mut impl Rng, dims: &[usize], ranks: &[usize], cond: f64) -> Result<GradedComplex> {
    let bases: Vec<CMat> = dims.iter().map(|&n| conditioned(rng, n, cond)).collect();
    let mut diff = Vec::with_capacity(dims.len().saturating_sub(1));
    for k in 0..dims.len().saturating_sub(1) {
        let r = ranks[k];
        let prev = if k == 0 { 0 } else { ranks[k - 1] };
        // ∂_k sends the basis vectors prev..prev+r of C^k onto the first r of C^{k+1}
        let mut std = linalg::zeros(dims[k + 1], dims[k]);
        for i in 0..r {
            std[(i, prev + i)] = linalg::c(1.0);
        }
        diff.push(&bases[k + 1] * std * linalg::inverse(&bases[k])?);
    }
    GradedComplex::new(dims.to_vec(), diff)
}

/// Random ranks compatible with `dims`.
pub fn random_ranks(rng: &mut impl Rng, dims: &[usize]) -> Vec<usize> {
    let mut ranks = Vec::new();
    let mut prev = 0;
    for k in 0..dims.len().saturating_sub(1) {
        let cap = (dims[k] - prev).min(dims[k + 1]);
        let r = rng.random_range(0..=cap);
        ranks.push(r);
        prev = r;
    }
    ranks
}

pub fn metric(rng: &mut impl Rng, dims: &[usize], cond: f64) -> Result<MetricFamily> {
    MetricFamily::new(dims.iter().map(|&n| spd(rng, n, cond)).collect())
}

/// Random `τ: ℂ^cols → ℂ^rows` of rank `rank`.
pub fn map_of_rank(rng: &mut impl Rng, rows: usize, cols: usize, rank: usize) -> CMat {
    complex_gaussian(rng, rows, rank) * complex_gaussian(rng, rank, cols)
}

/// Shape of random pair data per stratum.
#[derive(Clone, Copy, Debug)]
pub struct StratumShape {
    pub w1: usize,
    pub w2: usize,
    pub v: usize,
    pub rank1: usize,
    pub rank2: usize,
}

impl StratumShape {
    /// Random shape with all dimensions at most `max_dim`.
    pub fn random(rng: &mut impl Rng, max_dim: usize) -> Self {
        let v = rng.random_range(1..=max_dim);
        let w1 = rng.random_range(0..=max_dim);
        let w2 = rng.random_range(0..=max_dim);
        let rank1 = rng.random_range(0..=w1.min(v));
        let rank2 = rng.random_range(0..=w2.min(v));
        Self { w1, w2, v, rank1, rank2 }
    }

    /// Random shape whose images cannot cover `V`.
    pub fn with_quotient(rng: &mut impl Rng, max_dim: usize) -> Self {
        let v = rng.random_range(2..=max_dim.max(2));
        let rank1 = rng.random_range(0..v);
        let rank2 = rng.random_range(0..v - rank1);
        let w1 = rng.random_range(rank1..=max_dim.max(rank1));
        let w2 = rng.random_range(rank2..=max_dim.max(rank2));
        Self { w1, w2, v, rank1, rank2 }
    }
}

pub fn pair_data(rng: &mut impl Rng, shapes: &[StratumShape], cond: f64) -> Result<PairData> {
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    let mut h1 = Vec::new();
    let mut h2 = Vec::new();
    let mut hv = Vec::new();
    for s in shapes {
        t1.push(map_of_rank(rng, s.v, s.w1, s.rank1));
        t2.push(map_of_rank(rng, s.v, s.w2, s.rank2));
        h1.push(spd(rng, s.w1, cond));
        h2.push(spd(rng, s.w2, cond));
        hv.push(spd(rng, s.v, cond));
    }
    PairData::new(t1, t2, h1, h2, hv)
}
