//! Matrix-valued elements of an exterior algebra on `m ≤ 4` generators.
//!
//! Coefficients are indexed by bitmasks: bit `i` set means generator `g_{i+1}`
//! is present. Forms commute with matrices here; graded-tensor signs are the
//! caller's business (see `superconnection`).

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::MatJson;
use crate::linalg::{self, CMat, C64};

pub const MAX_GENERATORS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannForm {
    m: usize,
    d: usize,
    coeffs: Vec<CMat>,
}

/// Sign of the shuffle putting `a ∪ b` in increasing order (`a`, `b` disjoint).
pub fn shuffle_sign(a: usize, b: usize) -> f64 {
    let mut inversions = 0u32;
    let mut bits = a;
    while bits != 0 {
        let i = bits.trailing_zeros();
        // generators of b strictly below i
        inversions += (b & ((1usize << i) - 1)).count_ones();
        bits &= bits - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn degree(mask: usize) -> usize {
    mask.count_ones() as usize
}

impl GrassmannForm {
    pub fn zero(m: usize, d: usize) -> Self {
        assert!(m <= MAX_GENERATORS, "at most {MAX_GENERATORS} generators");
        Self { m, d, coeffs: vec![linalg::zeros(d, d); 1 << m] }
    }

    pub fn from_body(m: usize, body: CMat) -> Self {
        let d = body.nrows();
        let mut f = Self::zero(m, d);
        f.coeffs[0] = body;
        f
    }

    pub fn identity(m: usize, d: usize) -> Self {
        Self::from_body(m, linalg::eye(d))
    }

    /// `g_i · a` for a 1-based generator index `i`.
    pub fn generator(m: usize, i: usize, a: CMat) -> Self {
        assert!(i >= 1 && i <= m, "generator index out of range");
        let mut f = Self::zero(m, a.nrows());
        f.coeffs[1 << (i - 1)] = a;
        f
    }

    /// Degree-one form `Σ_i g_i · a_i`.
    pub fn one_form(parts: Vec<CMat>) -> Self {
        let m = parts.len();
        let d = parts.first().map_or(0, |a| a.nrows());
        let mut f = Self::zero(m, d);
        for (i, a) in parts.into_iter().enumerate() {
            f.coeffs[1 << i] = a;
        }
        f
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_coeffs(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, mask: usize) -> &CMat {
        &self.coeffs[mask]
    }

    pub fn coeff_mut(&mut self, mask: usize) -> &mut CMat {
        &mut self.coeffs[mask]
    }

    pub fn set_coeff(&mut self, mask: usize, a: CMat) {
        assert_eq!(a.nrows(), self.d);
        self.coeffs[mask] = a;
    }

    pub fn body(&self) -> &CMat {
        &self.coeffs[0]
    }

    /// The form with its degree-zero part removed.
    pub fn soul(&self) -> Self {
        let mut s = self.clone();
        s.coeffs[0].fill(linalg::ZERO);
        s
    }

    /// Part of form degree exactly `p`.
    pub fn degree_part(&self, p: usize) -> Self {
        let mut s = self.clone();
        for (mask, a) in s.coeffs.iter_mut().enumerate() {
            if degree(mask) != p {
                a.fill(linalg::ZERO);
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { m: self.m, d: self.d, coeffs: self.coeffs.iter().map(|a| a * s).collect() }
    }

    /// Applies `a ↦ f(mask, a)` to every coefficient.
    pub fn map_coeffs(&self, f: impl Fn(usize, &CMat) -> CMat) -> Self {
        let coeffs: Vec<CMat> = self.coeffs.iter().enumerate().map(|(k, a)| f(k, a)).collect();
        let d = coeffs[0].nrows();
        Self { m: self.m, d, coeffs }
    }

    /// Coefficient-wise conjugation `a ↦ p a q`.
    pub fn conjugate_by(&self, p: &CMat, q: &CMat) -> Self {
        self.map_coeffs(|_, a| p * a * q)
    }

    /// Coefficient-wise trace, returned as a scalar form (`d = 1`).
    pub fn trace(&self) -> Self {
        self.map_coeffs(|_, a| CMat::from_element(1, 1, a.trace()))
    }

    /// Scalar coefficient of a `d = 1` form.
    pub fn scalar(&self, mask: usize) -> C64 {
        assert_eq!(self.d, 1, "scalar access on a matrix-valued form");
        self.coeffs[mask][(0, 0)]
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.m != other.m || self.d != other.d {
            return Err(Error::Shape(format!(
                "grassmann product of (m={}, d={}) and (m={}, d={})",
                self.m, self.d, other.m, other.d
            )));
        }
        let n = 1 << self.m;
        let mut out = Self::zero(self.m, self.d);
        for i in 0..n {
            if linalg::max_abs(&self.coeffs[i]) == 0.0 {
                continue;
            }
            for j in 0..n {
                if i & j != 0 || linalg::max_abs(&other.coeffs[j]) == 0.0 {
                    continue;
                }
                let s = shuffle_sign(i, j);
                let prod = &self.coeffs[i] * &other.coeffs[j];
                out.coeffs[i | j] += prod * linalg::c(s);
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.m != other.m || self.d != other.d {
            return Err(Error::Shape("grassmann sum of mismatched forms".into()));
        }
        Ok(Self {
            m: self.m,
            d: self.d,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    /// `selfᵏ`.
    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::identity(self.m, self.d);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn to_json(&self) -> GrassmannJson {
        let mut coeffs = BTreeMap::new();
        for (mask, a) in self.coeffs.iter().enumerate() {
            if linalg::max_abs(a) == 0.0 && mask != 0 {
                continue;
            }
            coeffs.insert(mask_key(mask), MatJson::from_mat(a));
        }
        GrassmannJson { m: self.m, d: self.d, coeffs }
    }

    pub fn from_json(j: &GrassmannJson) -> Result<Self> {
        if j.m > MAX_GENERATORS {
            return Err(Error::InvalidArgument(format!("m = {} exceeds {MAX_GENERATORS}", j.m)));
        }
        let mut f = Self::zero(j.m, j.d);
        for (key, mat) in &j.coeffs {
            let mask = parse_mask_key(key, j.m)?;
            let a = mat.to_mat()?;
            if a.nrows() != j.d || a.ncols() != j.d {
                return Err(Error::Shape(format!("coefficient {key} is not {}×{}", j.d, j.d)));
            }
            f.coeffs[mask] = a;
        }
        Ok(f)
    }
}

impl Mul for &GrassmannForm {
    type Output = GrassmannForm;
    fn mul(self, rhs: &GrassmannForm) -> GrassmannForm {
        self.try_mul(rhs).expect("mismatched grassmann product")
    }
}

impl Add for &GrassmannForm {
    type Output = GrassmannForm;
    fn add(self, rhs: &GrassmannForm) -> GrassmannForm {
        self.try_add(rhs).expect("mismatched grassmann sum")
    }
}

impl Sub for &GrassmannForm {
    type Output = GrassmannForm;
    fn sub(self, rhs: &GrassmannForm) -> GrassmannForm {
        self.try_add(&rhs.scale(linalg::c(-1.0))).expect("mismatched grassmann difference")
    }
}

/// `"[1,3]"` style key for a bitmask (1-based generators).
pub fn mask_key(mask: usize) -> String {
    let idx: Vec<String> = (0..MAX_GENERATORS)
        .filter(|i| mask & (1 << i) != 0)
        .map(|i| (i + 1).to_string())
        .collect();
    format!("[{}]", idx.join(","))
}

pub fn parse_mask_key(key: &str, m: usize) -> Result<usize> {
    let bad = || Error::InvalidArgument(format!("bad coefficient key {key:?}"));
    let inner = key.trim().strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(bad)?;
    let mut mask = 0usize;
    let mut last = 0usize;
    for part in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let i: usize = part.parse().map_err(|_| bad())?;
        if i == 0 || i > m || i <= last {
            return Err(bad());
        }
        last = i;
        mask |= 1 << (i - 1);
    }
    Ok(mask)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrassmannJson {
    pub m: usize,
    pub d: usize,
    pub coeffs: BTreeMap<String, MatJson>,
}
