//! JSON encodings shared by the data types: complex matrices are lists of rows,
//! each entry either a real number or an `[re, im]` pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hodge::{GradedComplex, MetricFamily};
use crate::linalg::{CMat, C64};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(&self) -> C64 {
        match *self {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(transparent)]
pub struct MatJson(pub Vec<Vec<Entry>>);

impl MatJson {
    pub fn from_mat(m: &CMat) -> Self {
        MatJson(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| Entry::Complex([m[(i, j)].re, m[(i, j)].im])).collect())
                .collect(),
        )
    }

    /// Converts to a matrix; an empty row list is a `0 × 0` matrix.
    pub fn to_mat(&self) -> Result<CMat> {
        self.to_mat_shaped(None)
    }

    /// Converts with an expected shape, which lets `[]` stand for `r × 0` or `0 × c`.
    pub fn to_mat_shaped(&self, shape: Option<(usize, usize)>) -> Result<CMat> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if let Some((r, c)) = shape {
            if r == 0 || c == 0 {
                if self.0.iter().all(Vec::is_empty) {
                    return Ok(CMat::zeros(r, c));
                }
            }
        }
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged matrix rows".into()));
        }
        let m = CMat::from_fn(rows, cols, |i, j| self.0[i][j].value());
        if let Some((r, c)) = shape {
            if (r, c) != (rows, cols) {
                return Err(Error::Shape(format!("matrix is {rows}×{cols}, expected {r}×{c}")));
            }
        }
        Ok(m)
    }
}

/// `{"dims": [...], "diff": [...], "metric": [...]}`; a missing metric means identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexJson {
    pub dims: Vec<usize>,
    pub diff: Vec<MatJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<MatJson>>,
}

impl ComplexJson {
    pub fn from_parts(cx: &GradedComplex, h: Option<&MetricFamily>) -> Self {
        ComplexJson {
            dims: cx.dims().to_vec(),
            diff: cx.diff().iter().map(MatJson::from_mat).collect(),
            metric: h.map(|h| h.mats().iter().map(MatJson::from_mat).collect()),
        }
    }

    pub fn to_parts(&self) -> Result<(GradedComplex, MetricFamily)> {
        let dims = &self.dims;
        if self.diff.len() + 1 != dims.len() {
            return Err(Error::Shape(format!("{} degrees but {} differentials", dims.len(), self.diff.len())));
        }
        let diff = self
            .diff
            .iter()
            .enumerate()
            .map(|(k, m)| m.to_mat_shaped(Some((dims[k + 1], dims[k]))))
            .collect::<Result<Vec<_>>>()?;
        let cx = GradedComplex::new(dims.clone(), diff)?;
        let h = match &self.metric {
            None => MetricFamily::identity(dims),
            Some(ms) => {
                if ms.len() != dims.len() {
                    return Err(Error::Shape("metric block count differs from degree count".into()));
                }
                MetricFamily::new(
                    ms.iter()
                        .zip(dims)
                        .map(|(m, &d)| m.to_mat_shaped(Some((d, d))))
                        .collect::<Result<Vec<_>>>()?,
                )?
            }
        };
        Ok((cx, h))
    }
}
