//! Families of metrized complexes over a flat torus `𝕋^m = [0,1)^m`, sampled on a
//! uniform periodic grid. The differential is constant (flat trivial
//! connection) and only the metric varies.

use crate::error::{Error, Result};
use crate::grassmann::GrassmannForm;
use crate::hodge::{GradedComplex, MetricFamily};
use crate::linalg::{self, CMat};

#[derive(Clone, Debug)]
pub struct FamilyOverGrid {
    pub cx: GradedComplex,
    /// Number of base dimensions (1 or 2).
    pub m: usize,
    /// Grid points per axis.
    pub g: usize,
    samples: Vec<MetricFamily>,
}

/// Connection form at one grid point plus a coarseness flag.
#[derive(Clone, Debug)]
pub struct OmegaSample {
    pub omega: GrassmannForm,
    /// Set when the second difference of `h` is large relative to `h`, i.e. the
    /// central difference is unlikely to be accurate.
    pub warning: Option<String>,
}

impl FamilyOverGrid {
    /// Samples `metric(x)` at `x = (i₁/g, …, i_m/g)`.
    pub fn from_fn(
        cx: GradedComplex,
        m: usize,
        g: usize,
        metric: impl Fn(&[f64]) -> Result<MetricFamily>,
    ) -> Result<Self> {
        if !(1..=2).contains(&m) {
            return Err(Error::InvalidArgument(format!("torus dimension must be 1 or 2, got {m}")));
        }
        if g < 3 {
            return Err(Error::InvalidArgument("grid needs at least 3 points per axis".into()));
        }
        let n = g.pow(m as u32);
        let mut samples = Vec::with_capacity(n);
        for idx in 0..n {
            let x = Self::coords_of(m, g, idx);
            let h = metric(&x)?;
            if h.mats().len() != cx.len() {
                return Err(Error::Shape("metric degree count differs from complex".into()));
            }
            samples.push(h);
        }
        Ok(Self { cx, m, g, samples })
    }

    pub fn n_points(&self) -> usize {
        self.samples.len()
    }

    pub fn step(&self) -> f64 {
        1.0 / self.g as f64
    }

    fn coords_of(m: usize, g: usize, idx: usize) -> Vec<f64> {
        let mut rest = idx;
        (0..m)
            .map(|_| {
                let i = rest % g;
                rest /= g;
                i as f64 / g as f64
            })
            .collect()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        Self::coords_of(self.m, self.g, idx)
    }

    /// Index of the neighbour `idx ± e_axis` with periodic wrap.
    pub fn shift(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let stride = self.g.pow(axis as u32);
        let i = (idx / stride) % self.g;
        let j = if forward { (i + 1) % self.g } else { (i + self.g - 1) % self.g };
        idx - i * stride + j * stride
    }

    pub fn metric(&self, idx: usize) -> &MetricFamily {
        &self.samples[idx]
    }
}

/// `ω_i(x) = h(x)^{-1} (h(x + e_i) − h(x − e_i)) / (2Δx)`, block-diagonal on the total space.
pub fn omega_from_family(fam: &FamilyOverGrid, idx: usize) -> Result<OmegaSample> {
    let dx = fam.step();
    let h = fam.metric(idx);
    let mut parts = Vec::with_capacity(fam.m);
    let mut worst: f64 = 0.0;
    for axis in 0..fam.m {
        let hp = fam.metric(fam.shift(idx, axis, true));
        let hm = fam.metric(fam.shift(idx, axis, false));
        let blocks: Vec<CMat> = h
            .mats()
            .iter()
            .zip(hp.mats().iter().zip(hm.mats()))
            .map(|(h0, (a, b))| {
                let second = linalg::frob(&(a - h0.scale(2.0) + b));
                worst = worst.max(second / linalg::frob(h0).max(f64::MIN_POSITIVE));
                Ok(linalg::inverse(h0)? * (a - b).scale(0.5 / dx))
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&CMat> = blocks.iter().collect();
        parts.push(linalg::block_diag(&refs));
    }
    let warning = (worst > 0.05).then(|| format!("relative second difference {worst:.3} exceeds 0.05"));
    Ok(OmegaSample { omega: GrassmannForm::one_form(parts), warning })
}

/// Per-degree connection forms of a family at one point.
pub fn omega_blocks(fam: &FamilyOverGrid, idx: usize) -> Result<Vec<GrassmannForm>> {
    let s = omega_from_family(fam, idx)?;
    Ok(crate::superconnection::split_by_degree(&s.omega, fam.cx.dims()))
}
