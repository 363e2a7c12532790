//! Witten-deformed de Rham operators on a one-dimensional line (interval or
//! circle) with coefficients in `ℂ^r`, discretized on a staggered grid.
//!
//! Functions live on vertices, `du`-coefficients on edge midpoints, and the
//! conjugated differential `e^{−φ} d e^{φ}` is the weighted difference
//! `(e^{φ_{j+1}−φ_e} a_{j+1} − e^{φ_j−φ_e} a_j)/h`. With trapezoid vertex
//! masses the assembled `D = d + d*` is exactly Hermitian, anticommutes with
//! the degree grading and has the continuum kernel dimension, so no spurious
//! doubled modes appear.
//!
//! A section `(a, b)` stands for `a + b du`; `c(a, b) = (−b, a)` and
//! `ĉ(a, b) = (b, a)`, so the operator is `scale·(c ∂ + φ′ ĉ + mass ĉc)`.

use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandedHermitian};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ZERO};
use crate::profile;

/// Boundary data of the line.
#[derive(Clone, Debug)]
pub enum Topology {
    /// Endpoint values of functions restricted to the column spans of
    /// `left`, `right` (orthonormal columns); `du`-parts are free.
    Interval { left: CMat, right: CMat },
    /// Periodic with parallel transport `holonomy` across the closing edge.
    Circle { holonomy: CMat },
}

/// Geometry and coefficients of a discretized line operator.
#[derive(Clone, Debug)]
pub struct LineSpec {
    pub r: usize,
    /// Coordinate of vertex 0.
    pub x0: f64,
    /// Total length.
    pub length: f64,
    /// Number of edges.
    pub cells: usize,
    /// `φ` at vertices, then at edge midpoints.
    pub phi_vertex: Vec<f64>,
    pub phi_edge: Vec<f64>,
    /// Coefficient of `ĉc`.
    pub mass: f64,
    pub scale: f64,
    pub topology: Topology,
}

impl LineSpec {
    pub fn n_vertices(&self) -> usize {
        match self.topology {
            Topology::Interval { .. } => self.cells + 1,
            Topology::Circle { .. } => self.cells,
        }
    }

    pub fn step(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn vertex_x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.step()
    }

    pub fn edge_x(&self, e: usize) -> f64 {
        self.x0 + (e as f64 + 0.5) * self.step()
    }

    /// Samples `φ` at vertices and edge midpoints.
    pub fn with_potential(mut self, phi: impl Fn(f64) -> f64) -> Self {
        self.phi_vertex = (0..self.n_vertices()).map(|j| phi(self.vertex_x(j))).collect();
        self.phi_edge = (0..self.cells).map(|e| phi(self.edge_x(e))).collect();
        self
    }
}

/// One block of the differential: edge `e` receives `coef · a_vertex`.
#[derive(Clone, Debug)]
struct DiffTerm {
    vertex: usize,
    coef: CMat,
}

/// Assembled operator with its index layout.
#[derive(Clone, Debug)]
pub struct LineOperator {
    pub spec: LineSpec,
    pub matrix: BandedHermitian,
    /// Matrix offset of each vertex and edge block.
    vertex_offset: Vec<usize>,
    edge_offset: Vec<usize>,
    /// Basis of the admissible values at each vertex (identity inside).
    vertex_basis: Vec<Option<CMat>>,
    mass_v: Vec<f64>,
    diff: Vec<[DiffTerm; 2]>,
}

/// Clifford actions on `V ⊕ V du` for rank `r`.
pub fn clifford_blocks(r: usize) -> (CMat, CMat) {
    let id = linalg::eye(r);
    let z = linalg::zeros(r, r);
    let neg = -&id;
    let c = linalg::vstack(&[&linalg::hstack(&[&z, &neg]), &linalg::hstack(&[&id, &z])]);
    let chat = linalg::vstack(&[&linalg::hstack(&[&z, &id]), &linalg::hstack(&[&id, &z])]);
    (c, chat)
}

/// Largest deviation from `c² = −1`, `ĉ² = 1`, `cĉ + ĉc = 0`.
pub fn clifford_defect(c: &CMat, chat: &CMat) -> f64 {
    let n = c.nrows();
    let id = linalg::eye(n);
    linalg::max_abs(&(c * c + &id))
        .max(linalg::max_abs(&(chat * chat - &id)))
        .max(linalg::max_abs(&(c * chat + chat * c)))
}

fn orthonormal_columns(m: &CMat) -> CMat {
    linalg::range_space(m, 1e-12)
}

impl LineOperator {
    pub fn assemble(spec: LineSpec) -> Result<Self> {
        let (r, n) = (spec.r, spec.cells);
        let nv = spec.n_vertices();
        if n < 2 || spec.phi_vertex.len() != nv || spec.phi_edge.len() != n {
            return Err(Error::Shape("line needs at least two cells and sampled potentials".into()));
        }
        let h = spec.step();
        let circle = matches!(spec.topology, Topology::Circle { .. });
        let mut vertex_basis: Vec<Option<CMat>> = vec![None; nv];
        let mut mass_v = vec![h; nv];
        match &spec.topology {
            Topology::Interval { left, right } => {
                if left.nrows() != r || right.nrows() != r {
                    return Err(Error::Shape("boundary subspaces must live in ℂ^r".into()));
                }
                vertex_basis[0] = Some(orthonormal_columns(left));
                vertex_basis[nv - 1] = Some(orthonormal_columns(right));
                mass_v[0] = 0.5 * h;
                mass_v[nv - 1] = 0.5 * h;
            }
            Topology::Circle { holonomy } => {
                if holonomy.nrows() != r || holonomy.ncols() != r {
                    return Err(Error::Shape("holonomy must be r × r".into()));
                }
                let defect = linalg::max_abs(&(holonomy.adjoint() * holonomy - linalg::eye(r)));
                if defect > 1e-12 {
                    return Err(Error::InvalidArgument(format!("holonomy is not unitary (defect {defect:.2e})")));
                }
            }
        }
        let vsize = |j: usize| vertex_basis[j].as_ref().map_or(r, |q| q.ncols());
        // chain of blocks v0 e0 v1 e1 …; circles are folded so that the closing
        // edge stays near the diagonal
        let chain_len = if circle { 2 * n } else { 2 * n + 1 };
        let order: Vec<usize> = if circle {
            (0..chain_len).map(|k| if k % 2 == 0 { k / 2 } else { chain_len - 1 - k / 2 }).collect()
        } else {
            (0..chain_len).collect()
        };
        let block_size = |c: usize| if c % 2 == 0 { vsize(c / 2) } else { r };
        let mut offset = vec![0; chain_len];
        let mut pos = 0;
        for &c in &order {
            offset[c] = pos;
            pos += block_size(c);
        }
        let dim = pos;
        let vertex_offset: Vec<usize> = (0..nv).map(|j| offset[2 * j]).collect();
        let edge_offset: Vec<usize> = (0..n).map(|e| offset[2 * e + 1]).collect();

        let sqrt_h = h.sqrt();
        let mut diff = Vec::with_capacity(n);
        for e in 0..n {
            let (j0, j1) = (e, (e + 1) % nv);
            let w0 = (spec.phi_vertex[j0] - spec.phi_edge[e]).exp();
            let w1 = (spec.phi_vertex[j1] - spec.phi_edge[e]).exp();
            let lift = |j: usize, s: f64| -> CMat {
                let base = match &vertex_basis[j] {
                    Some(q) => q.clone(),
                    None => linalg::eye(r),
                };
                base.scale(s)
            };
            let c0 = lift(j0, -sqrt_h * w0 / (h * mass_v[j0].sqrt()));
            let mut c1 = lift(j1, sqrt_h * w1 / (h * mass_v[j1].sqrt()));
            if let (Topology::Circle { holonomy }, true) = (&spec.topology, e == n - 1) {
                c1 = holonomy * c1;
            }
            diff.push([DiffTerm { vertex: j0, coef: c0 }, DiffTerm { vertex: j1, coef: c1 }]);
        }

        let s = spec.scale;
        let mut entries: Vec<(usize, usize, C64)> = Vec::new();
        let mut push = |i: usize, j: usize, v: C64| {
            if v == ZERO {
                return;
            }
            if i >= j {
                entries.push((i, j, v));
            } else {
                entries.push((j, i, v.conj()));
            }
        };
        for j in 0..nv {
            for k in 0..vsize(j) {
                push(vertex_offset[j] + k, vertex_offset[j] + k, C64::new(s * spec.mass, 0.0));
            }
        }
        for e in 0..n {
            for k in 0..r {
                push(edge_offset[e] + k, edge_offset[e] + k, C64::new(-s * spec.mass, 0.0));
            }
            for term in &diff[e] {
                for a in 0..r {
                    for b in 0..term.coef.ncols() {
                        push(edge_offset[e] + a, vertex_offset[term.vertex] + b, term.coef[(a, b)] * s);
                    }
                }
            }
        }
        let matrix = BandedHermitian::from_lower_entries(dim, &entries)?;
        Ok(Self { spec, matrix, vertex_offset, edge_offset, vertex_basis, mass_v, diff })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_offset.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_offset.len()
    }

    fn vertex_size(&self, j: usize) -> usize {
        self.vertex_basis[j].as_ref().map_or(self.spec.r, |q| q.ncols())
    }

    /// Function value `a(x_j) ∈ ℂ^r` of a coefficient vector.
    pub fn vertex_value(&self, y: &CVec, j: usize) -> CVec {
        let k = self.vertex_size(j);
        let local = y.rows(self.vertex_offset[j], k).into_owned();
        let full = match &self.vertex_basis[j] {
            Some(q) => q * local,
            None => local,
        };
        full / C64::new(self.mass_v[j].sqrt(), 0.0)
    }

    /// `du`-coefficient `b` at the midpoint of edge `e`.
    pub fn edge_value(&self, y: &CVec, e: usize) -> CVec {
        y.rows(self.edge_offset[e], self.spec.r).into_owned() / C64::new(self.spec.step().sqrt(), 0.0)
    }

    /// `du`-coefficient averaged onto vertex `j` from its edges.
    pub fn edge_value_at_vertex(&self, y: &CVec, j: usize) -> CVec {
        let n = self.n_edges();
        let circle = matches!(self.spec.topology, Topology::Circle { .. });
        let left = if j > 0 { Some(j - 1) } else if circle { Some(n - 1) } else { None };
        let right = if j < n { Some(j) } else { None };
        match (left, right) {
            (Some(a), Some(b)) => (self.edge_value(y, a) + self.edge_value(y, b)) * C64::new(0.5, 0.0),
            (Some(a), None) => self.edge_value(y, a),
            (None, Some(b)) => self.edge_value(y, b),
            (None, None) => CVec::zeros(self.spec.r),
        }
    }

    /// Coefficient vector of the section with vertex values `a` and edge
    /// values `b`; endpoint values are projected onto the admissible spaces.
    pub fn from_values(&self, a: &[CVec], b: &[CVec]) -> CVec {
        let mut y = CVec::zeros(self.dim());
        for (j, v) in a.iter().enumerate() {
            let local = match &self.vertex_basis[j] {
                Some(q) => q.adjoint() * v,
                None => v.clone(),
            } * C64::new(self.mass_v[j].sqrt(), 0.0);
            y.rows_mut(self.vertex_offset[j], local.len()).copy_from(&local);
        }
        let sh = C64::new(self.spec.step().sqrt(), 0.0);
        for (e, v) in b.iter().enumerate() {
            y.rows_mut(self.edge_offset[e], self.spec.r).copy_from(&(v * sh));
        }
        y
    }

    /// Applies the conjugated differential (functions to `du`-forms) in
    /// orthonormal coordinates, without the overall scale.
    pub fn apply_d(&self, y: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for (e, terms) in self.diff.iter().enumerate() {
            let mut acc = CVec::zeros(self.spec.r);
            for t in terms {
                acc += &t.coef * y.rows(self.vertex_offset[t.vertex], t.coef.ncols());
            }
            out.rows_mut(self.edge_offset[e], self.spec.r).copy_from(&acc);
        }
        out
    }

    /// Projection onto the function (degree 0) components.
    pub fn degree_zero_part(&self, y: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for j in 0..self.n_vertices() {
            let k = self.vertex_size(j);
            out.rows_mut(self.vertex_offset[j], k).copy_from(&y.rows(self.vertex_offset[j], k));
        }
        out
    }

    /// Pointwise `‖ω_x‖²` at vertices, with `du`-parts averaged from edges.
    pub fn pointwise_norms(&self, y: &CVec) -> Vec<f64> {
        (0..self.n_vertices())
            .map(|j| self.vertex_value(y, j).norm_squared() + self.edge_value_at_vertex(y, j).norm_squared())
            .collect()
    }

    /// Solves `(D − λ) ω = 0` at all rows except the endpoint function rows,
    /// with the endpoint function values prescribed in full `ℂ^r`. Requires an
    /// interval whose boundary spaces are all of `ℂ^r`.
    pub fn solve_interior(&self, lambda: f64, left: &CVec, right: &CVec) -> Result<CVec> {
        let r = self.spec.r;
        let nv = self.n_vertices();
        if !matches!(self.spec.topology, Topology::Interval { .. })
            || self.vertex_size(0) != r
            || self.vertex_size(nv - 1) != r
        {
            return Err(Error::InvalidArgument("interior solves need an interval with free endpoint values".into()));
        }
        let fixed: Vec<usize> = (0..r)
            .map(|k| self.vertex_offset[0] + k)
            .chain((0..r).map(|k| self.vertex_offset[nv - 1] + k))
            .collect();
        let is_fixed = |i: usize| fixed.contains(&i);
        let m = &self.matrix;
        let shift = C64::new(lambda, 0.0);
        let lu = BandLu::factor_with(self.dim(), m.bandwidth(), m.pivmin(), |i, j| {
            if is_fixed(i) {
                if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            } else if i == j {
                m.get(i, j) - shift
            } else {
                m.get(i, j)
            }
        })?;
        let mut rhs = CVec::zeros(self.dim());
        let (s0, s1) = (C64::new(self.mass_v[0].sqrt(), 0.0), C64::new(self.mass_v[nv - 1].sqrt(), 0.0));
        for k in 0..r {
            rhs[self.vertex_offset[0] + k] = left[k] * s0;
            rhs[self.vertex_offset[nv - 1] + k] = right[k] * s1;
        }
        Ok(lu.solve(&rhs))
    }
}

/// `[−1, 1]` with `φ = T f_T` and the given endpoint spaces.
pub fn interval_spec(r: usize, v1: &CMat, v2: &CMat, t: f64, n: usize, mass: f64) -> LineSpec {
    LineSpec {
        r,
        x0: -1.0,
        length: 2.0,
        cells: n,
        phi_vertex: Vec::new(),
        phi_edge: Vec::new(),
        mass,
        scale: 1.0,
        topology: Topology::Interval { left: v1.clone(), right: v2.clone() },
    }
    .with_potential(|s| t * profile::f_t(t, s))
}

/// Discretized `D^V_{T,bd} = c ∂/∂u + T f′_T ĉ` on `[−1, 1]` with
/// `ω(−1) ∈ V₁ ⊕ V₁^⊥ du`, `ω(1) ∈ V₂ ⊕ V₂^⊥ du`.
pub fn assemble(r: usize, v1: &CMat, v2: &CMat, t: f64, n: usize) -> Result<LineOperator> {
    if n < (50.0 * t.max(1.0)).ceil() as usize {
        return Err(Error::GridTooCoarse(format!("N = {n} is below 50·max(1, T) for T = {t}")));
    }
    LineOperator::assemble(interval_spec(r, v1, v2, t, n, 0.0))
}

/// Eigenvalues below this multiple of `‖D‖` count as kernel.
const KERNEL_TOL: f64 = 1e-11;

/// Classified spectrum around the unit small-band cutoff.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BandReport {
    pub t: f64,
    pub cutoff: f64,
    pub n_small: usize,
    pub expected_small: Option<usize>,
    pub small: Vec<f64>,
    pub kernel_dim: usize,
    pub lambda_small_max: f64,
    /// Smallest `|λ|` beyond the cutoff.
    pub large_min: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// Set when an eigenvalue lies within 10% of the cutoff.
    pub ambiguous: bool,
}

impl BandReport {
    pub fn count_matches(&self) -> bool {
        self.expected_small.is_none_or(|e| e == self.n_small)
    }
}

/// Small band `|λ| ≤ cutoff`, the nearest large eigenvalues and the scaling
/// constants `α̂ = min|λ_large|/√T`, `β̂ = max|λ_small| e^T/√T`.
pub fn band_report_with(m: &BandedHermitian, t: f64, cutoff: f64, expected: Option<usize>) -> BandReport {
    let below = m.count_below(-cutoff);
    let upto = m.count_below(cutoff * (1.0 + 1e-14));
    let small = match m.eigenpairs_in(-cutoff, cutoff * (1.0 + 1e-14)) {
        Ok((vals, _)) => vals,
        Err(_) => m.eigenvalues_by_index(below, upto),
    };
    let mut large = Vec::new();
    if below > 0 {
        large.extend(m.eigenvalues_by_index(below - 1, below));
    }
    large.extend(m.eigenvalues_by_index(upto, upto + 1));
    let large_min = large.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let ktol = KERNEL_TOL * m.gershgorin().1.abs().max(m.gershgorin().0.abs()).max(1.0);
    let kernel_dim = small.iter().filter(|x| x.abs() <= ktol).count();
    let lambda_small_max = small.iter().filter(|x| x.abs() > ktol).map(|x| x.abs()).fold(0.0, f64::max);
    let ambiguous = m.count_below(1.1 * cutoff) - m.count_below(0.9 * cutoff) > 0
        || m.count_below(-0.9 * cutoff) - m.count_below(-1.1 * cutoff) > 0;
    let st = t.sqrt();
    BandReport {
        t,
        cutoff,
        n_small: small.len(),
        expected_small: expected,
        small,
        kernel_dim,
        lambda_small_max,
        large_min,
        alpha_hat: large_min / st,
        beta_hat: lambda_small_max * t.exp() / st,
        ambiguous,
    }
}

/// Band report of the interval operator; the expected small count is
/// `dim V₁ + dim V₂ + r`.
pub fn band_report(op: &LineOperator, t: f64) -> BandReport {
    let expected = match &op.spec.topology {
        Topology::Interval { left, right } => {
            Some(linalg::rank(left, 1e-12) + linalg::rank(right, 1e-12) + op.spec.r)
        }
        Topology::Circle { .. } => None,
    };
    band_report_with(&op.matrix, t, 1.0, expected)
}

/// `dim(V₁ ∩ V₂) + dim(V₁^⊥ ∩ V₂^⊥)`.
pub fn expected_kernel_dim(v1: &CMat, v2: &CMat) -> usize {
    let r = v1.nrows();
    let inter = |a: &CMat, b: &CMat| {
        let (ra, rb) = (linalg::rank(a, 1e-12), linalg::rank(b, 1e-12));
        ra + rb - linalg::rank(&linalg::hstack(&[a, b]), 1e-12)
    };
    let perp = |a: &CMat| {
        let q = orthonormal_columns(a);
        if q.ncols() == 0 {
            linalg::eye(r)
        } else {
            linalg::null_space(&q.adjoint(), 1e-12)
        }
    };
    inter(v1, v2) + inter(&perp(v1), &perp(v2))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundaryResidual {
    /// `‖P₁^⊥ ω(−1)‖ + ‖P₂^⊥ ω(1)‖`.
    pub defect: f64,
    pub max_norm: f64,
}

fn complement_norm(basis: &CMat, v: &CVec) -> f64 {
    let q = orthonormal_columns(basis);
    (v - &q * (q.adjoint() * v)).norm()
}

/// Boundary defect of a section given by full vertex values `a` and edge
/// values `b` against the interval's boundary spaces.
pub fn boundary_residual(op: &LineOperator, a: &[CVec], b: &[CVec]) -> Result<BoundaryResidual> {
    let Topology::Interval { left, right } = &op.spec.topology else {
        return Err(Error::InvalidArgument("boundary residual needs an interval".into()));
    };
    let nv = op.n_vertices();
    let defect = complement_norm(left, &a[0]) + complement_norm(right, &a[nv - 1]);
    let max_norm = a.iter().chain(b).map(|v| v.norm()).fold(0.0, f64::max);
    Ok(BoundaryResidual { defect, max_norm })
}

/// Vertex and edge values of a coefficient vector.
pub fn section_values(op: &LineOperator, y: &CVec) -> (Vec<CVec>, Vec<CVec>) {
    (
        (0..op.n_vertices()).map(|j| op.vertex_value(y, j)).collect(),
        (0..op.n_edges()).map(|e| op.edge_value(y, e)).collect(),
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerturbationReport {
    pub epsilon: f64,
    pub defect: f64,
    /// `‖ω − P^{[λ−w, λ+w]} ω‖ / ‖ω‖`.
    pub distance: f64,
}

/// Perturbs the boundary value of the eigenpair `(λ, y)` by `ε` in a direction
/// violating the left boundary condition, continues it as an interior solution
/// and measures how far the admissible part lies from the spectral window
/// `[λ − w, λ + w]` of the operator `op`.
pub fn boundary_perturbation(
    op: &LineOperator,
    lambda: f64,
    y: &CVec,
    epsilon: f64,
    window: f64,
) -> Result<PerturbationReport> {
    let Topology::Interval { left, right } = &op.spec.topology else {
        return Err(Error::InvalidArgument("boundary perturbation needs an interval".into()));
    };
    let r = op.spec.r;
    let q1 = orthonormal_columns(left);
    let comp = if q1.ncols() == r { None } else { Some(linalg::null_space(&q1.adjoint(), 1e-12)) };
    let Some(comp) = comp else {
        return Err(Error::InvalidArgument("left boundary space is everything; nothing to violate".into()));
    };
    let free = LineOperator::assemble(LineSpec {
        topology: Topology::Interval { left: linalg::eye(r), right: linalg::eye(r) },
        ..op.spec.clone()
    })?;
    let (a, _) = section_values(op, y);
    let nv = op.n_vertices();
    let bump = comp.column(0).into_owned() * C64::new(epsilon * a.iter().map(|v| v.norm()).fold(0.0, f64::max), 0.0);
    let z = free.solve_interior(lambda, &(&a[0] + &bump), &a[nv - 1])?;
    let (za, zb) = section_values(&free, &z);
    let defect = complement_norm(left, &za[0]) + complement_norm(right, &za[nv - 1]);
    let w = op.from_values(&za, &zb);
    let (_, vecs) = op.matrix.eigenpairs_in(lambda - window, lambda + window)?;
    let mut rest = w.clone();
    for v in &vecs {
        let c = v.dotc(&rest);
        rest -= v * c;
    }
    Ok(PerturbationReport { epsilon, defect, distance: rest.norm() / w.norm() })
}
