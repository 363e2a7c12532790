//! One-dimensional glued fibres: end pieces joined by cylinders `Y × [−R, R]`
//! with `Y` a finite point set, the deformed operator `R·D_{R,T}` on them,
//! the cylinder mode blocks, and the comparison of the small-eigenvalue
//! complex with the finite model.
//!
//! The fibre lives on a coordinate `u`; each cylinder carries `s = u/R`
//! relative to its centre and the potential `T f_T(s)`, which vanishes on the
//! end pieces. In `u` the operator is `c ∂_u + (T/R) f′_T ĉ`, so `R·D_{R,T}`
//! restricted to a cylinder is the interval operator in `s`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::mv_model::{self, PairData, Variant};
use crate::profile;
use crate::witten::{self, BandReport, LineOperator, LineSpec, Topology};

#[derive(Clone, Debug)]
pub enum FiberTopology {
    /// `[−R − L₁, R + L₂]` with absolute boundary conditions; `Y` is one point.
    Interval,
    /// Circle of length `L₁ + L₂ + 4R` with holonomy `ρ`; `Y` is two points.
    Circle { holonomy: CMat },
}

#[derive(Clone, Debug)]
pub struct FiberSpec {
    pub topology: FiberTopology,
    pub l1: f64,
    pub l2: f64,
    /// Cylinder half-length `R`.
    pub r_half: f64,
    pub t: f64,
    pub rank: usize,
}

impl FiberSpec {
    /// `T = R^κ` with `κ ∈ (0, 1/3)` and unit end pieces.
    pub fn with_kappa(topology: FiberTopology, rank: usize, r_half: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0 / 3.0) {
            return Err(Error::InvalidArgument(format!("κ must lie in (0, 1/3), got {kappa}")));
        }
        let spec = Self { topology, l1: 1.0, l2: 1.0, r_half, t: r_half.powf(kappa), rank };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l1 > 0.0 && self.l2 > 0.0 && self.r_half > 0.0 && self.t >= 0.0) || self.rank == 0 {
            return Err(Error::InvalidArgument("fibre needs positive lengths, T ≥ 0 and rank ≥ 1".into()));
        }
        if let FiberTopology::Circle { holonomy } = &self.topology {
            if holonomy.nrows() != self.rank || holonomy.ncols() != self.rank {
                return Err(Error::Shape("holonomy must be rank × rank".into()));
            }
            let defect = linalg::max_abs(&(holonomy.adjoint() * holonomy - linalg::eye(self.rank)));
            if defect > 1e-12 {
                return Err(Error::InvalidArgument(format!("holonomy is not unitary (defect {defect:.2e})")));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        match self.topology {
            FiberTopology::Interval => self.l1 + self.l2 + 2.0 * self.r_half,
            FiberTopology::Circle { .. } => self.l1 + self.l2 + 4.0 * self.r_half,
        }
    }

    /// `dim H•(Z, F)`.
    pub fn expected_kernel_dim(&self) -> usize {
        match &self.topology {
            FiberTopology::Interval => self.rank,
            FiberTopology::Circle { holonomy } => {
                let fixed = linalg::null_space(&(holonomy - linalg::eye(self.rank)), 1e-10).ncols();
                2 * fixed
            }
        }
    }
}

/// Cylinder `s ∈ [−1, 1]` located at `u ∈ [start, start + 2R]`.
#[derive(Clone, Debug)]
pub struct Neck {
    pub start: f64,
    pub left_piece: usize,
    pub right_piece: usize,
    /// Transport applied to the right piece's value at the right end.
    pub right_transport: CMat,
}

/// End piece `u ∈ [start, end]`.
#[derive(Clone, Debug)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug)]
pub struct GluedOperator {
    pub spec: FiberSpec,
    pub line: LineOperator,
    pub pieces: Vec<Piece>,
    pub necks: Vec<Neck>,
    pub cells_per_unit: usize,
}

impl GluedOperator {
    fn neck_s(&self, k: usize, u: f64) -> Option<f64> {
        let n = &self.necks[k];
        let s = (u - n.start) / self.spec.r_half - 1.0;
        (-1.0..=1.0).contains(&s).then_some(s)
    }

    /// `T f_T(u/R)` on cylinders, 0 elsewhere.
    pub fn potential(&self, u: f64) -> f64 {
        (0..self.necks.len())
            .find_map(|k| self.neck_s(k, u))
            .map_or(0.0, |s| self.spec.t * profile::f_t(self.spec.t, s))
    }
}

fn geometry(spec: &FiberSpec) -> (Vec<Piece>, Vec<Neck>) {
    let (r, l1, l2) = (spec.r_half, spec.l1, spec.l2);
    let id = linalg::eye(spec.rank);
    match &spec.topology {
        FiberTopology::Interval => {
            let x0 = -r - l1;
            let pieces = vec![Piece { start: x0, end: -r }, Piece { start: r, end: r + l2 }];
            let necks = vec![Neck { start: -r, left_piece: 0, right_piece: 1, right_transport: id }];
            (pieces, necks)
        }
        FiberTopology::Circle { holonomy } => {
            let pieces = vec![Piece { start: 0.0, end: l1 }, Piece { start: l1 + 2.0 * r, end: l1 + 2.0 * r + l2 }];
            let necks = vec![
                Neck { start: l1, left_piece: 0, right_piece: 1, right_transport: id },
                // the closing point u = ℓ ≡ 0 carries the holonomy
                Neck { start: l1 + 2.0 * r + l2, left_piece: 1, right_piece: 0, right_transport: holonomy.clone() },
            ];
            (pieces, necks)
        }
    }
}

/// Assembles `R·D_{R,T}` on a uniform grid with `cells_per_unit` cells per unit
/// of `u`; all cut points must fall on grid nodes.
pub fn assemble_glued(spec: &FiberSpec, cells_per_unit: usize) -> Result<GluedOperator> {
    spec.validate()?;
    let (pieces, necks) = geometry(spec);
    let npu = cells_per_unit as f64;
    let length = spec.length();
    let cells = (length * npu).round() as usize;
    let x0 = match spec.topology {
        FiberTopology::Interval => -spec.r_half - spec.l1,
        FiberTopology::Circle { .. } => 0.0,
    };
    for p in &pieces {
        for x in [p.start, p.end] {
            let k = (x - x0) * npu;
            if (k - k.round()).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("cut point u = {x} is not a grid node at {cells_per_unit} cells per unit")));
            }
        }
    }
    let neck_cells = 2.0 * spec.r_half * npu;
    if neck_cells < 50.0 * spec.t.max(1.0) {
        return Err(Error::GridTooCoarse(format!(
            "{neck_cells} cells across a cylinder is below 50·max(1, T) for T = {}",
            spec.t
        )));
    }
    let topology = match &spec.topology {
        FiberTopology::Interval => Topology::Interval { left: linalg::eye(spec.rank), right: linalg::eye(spec.rank) },
        FiberTopology::Circle { holonomy } => Topology::Circle { holonomy: holonomy.clone() },
    };
    let mut op = GluedOperator {
        spec: spec.clone(),
        line: witten::assemble(1, &linalg::eye(1), &linalg::eye(1), 0.0, 50)?,
        pieces,
        necks,
        cells_per_unit,
    };
    let line_spec = LineSpec {
        r: spec.rank,
        x0,
        length,
        cells,
        phi_vertex: Vec::new(),
        phi_edge: Vec::new(),
        mass: 0.0,
        scale: spec.r_half,
        topology,
    }
    .with_potential(|u| op.potential(u));
    op.line = LineOperator::assemble(line_spec)?;
    Ok(op)
}

/// The pair `(τ₁, τ₂)` read off the fibre: `W_j = H⁰(piece j)`, one copy of
/// `ℂ^r` in `V` per cylinder, and `∂` = value at the right end minus value at
/// the left end. `h^{W_j}` is pulled back from `V` through `τ_j`.
pub fn model_pair(op: &GluedOperator) -> Result<PairData> {
    let r = op.spec.rank;
    let nv = op.necks.len();
    let mut tau = [linalg::zeros(r * nv, r), linalg::zeros(r * nv, r)];
    for (k, n) in op.necks.iter().enumerate() {
        // ∂ = −τ₁w₁ + τ₂w₂, so piece 0 enters with a flipped sign
        let sign = |piece: usize| if piece == 0 { -1.0 } else { 1.0 };
        let left = linalg::eye(r).scale(-sign(n.left_piece));
        let right = n.right_transport.scale(sign(n.right_piece));
        let mut add = |piece: usize, m: &CMat| {
            let mut view = tau[piece].view_mut((k * r, 0), (r, r));
            view += m;
        };
        add(n.left_piece, &left);
        add(n.right_piece, &right);
    }
    let [t1, t2] = tau;
    let h1 = t1.adjoint() * &t1;
    let h2 = t2.adjoint() * &t2;
    PairData::new(vec![t1], vec![t2], vec![h1], vec![h2], vec![linalg::eye(r * nv)])
}

/// `dim C^{•,•}₀` of the model, the predicted small-band count.
pub fn model_small_count(op: &GluedOperator) -> usize {
    let r = op.spec.rank;
    r * (op.pieces.len() + op.necks.len())
}

/// Classifies `Sp(R·D_{R,T})` around the unit cutoff.
pub fn gap_check(op: &GluedOperator) -> BandReport {
    witten::band_report_with(&op.line.matrix, op.spec.t, 1.0, Some(model_small_count(op)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SmallComplexReport {
    pub r: f64,
    pub t: f64,
    pub dim0: usize,
    pub dim1: usize,
    /// Nonzero small eigenvalues of `R·D_{R,T}`, ascending.
    pub small_nonzero: Vec<f64>,
    /// The same predicted by `R·(R^{−1}∂_T)` on the scaled model.
    pub model_nonzero: Vec<f64>,
    pub eigen_rel_err: f64,
    /// Condition number of `𝒮` in the model metric.
    pub condition: f64,
    /// `max |‖𝒮σ‖² / h^C_{R,T}(σ, σ) − 1|`.
    pub metric_ratio_err: f64,
    /// `‖𝒮^{−1}d𝒮 / (π^{−1/2}R^{−1}T^{1/2}e^{−T}) − ∂‖` in the model metric.
    pub derham_ratio_err: f64,
    /// `‖d²‖` on the band, after projecting back onto it.
    pub d_squared: f64,
    /// Largest deviation of `P d` from `d P` on the band basis.
    pub band_invariance: f64,
}

/// The small-eigenvalue complex and its comparison with the scaled model.
#[derive(Clone, Debug)]
pub struct SmallComplex {
    /// Orthonormal bases of the degree-0 and degree-1 parts of the band.
    pub e0: CMat,
    pub e1: CMat,
    /// `d` restricted to the band, `E¹† d E⁰`.
    pub d: CMat,
    /// Projected trial sections `𝒮` on `C⁰` and `C¹` (columns, grid coordinates).
    pub s0: CMat,
    pub s1: CMat,
    pub report: SmallComplexReport,
}

fn columns(vs: &[CVec], n: usize) -> CMat {
    if vs.is_empty() {
        return linalg::zeros(n, 0);
    }
    CMat::from_columns(vs)
}

/// Trial sections `G⁺w` for a basis of each `W_j` and `I⁺v` for a basis of
/// `V`, in grid coordinates.
pub fn trial_sections(op: &GluedOperator) -> (CMat, CMat) {
    let line = &op.line;
    let r = op.spec.rank;
    let t = op.spec.t;
    let nvx = line.n_vertices();
    let ne = line.n_edges();
    let zero_v: Vec<CVec> = vec![CVec::zeros(r); nvx];
    let zero_e: Vec<CVec> = vec![CVec::zeros(r); ne];
    let mut g = Vec::new();
    for (p, piece) in op.pieces.iter().enumerate() {
        for k in 0..r {
            let mut w = CVec::zeros(r);
            w[k] = C64::new(1.0, 0.0);
            let mut a = zero_v.clone();
            for (j, slot) in a.iter_mut().enumerate() {
                let u = line.spec.vertex_x(j);
                if u >= piece.start - 1e-12 && u <= piece.end + 1e-12 {
                    *slot = w.clone();
                    continue;
                }
                for (nk, neck) in op.necks.iter().enumerate() {
                    let Some(s) = op.neck_s(nk, u) else { continue };
                    let damp = (-t * profile::f_t(t, s)).exp();
                    if neck.left_piece == p {
                        *slot += &w * C64::new(damp * profile::chi1(s), 0.0);
                    }
                    if neck.right_piece == p {
                        *slot += (&neck.right_transport * &w) * C64::new(damp * profile::chi2(s), 0.0);
                    }
                }
            }
            g.push(line.from_values(&a, &zero_e));
        }
    }
    let mut iv = Vec::new();
    for nk in 0..op.necks.len() {
        for k in 0..r {
            let mut b = zero_e.clone();
            for (e, slot) in b.iter_mut().enumerate() {
                if let Some(s) = op.neck_s(nk, line.spec.edge_x(e)) {
                    slot[k] = C64::new(profile::chi3(s) * (t * profile::f_t(t, s) - t).exp(), 0.0);
                }
            }
            iv.push(line.from_values(&zero_v, &b));
        }
    }
    (columns(&g, line.dim()), columns(&iv, line.dim()))
}

fn project(e: &CMat, m: &CMat) -> CMat {
    e * (e.adjoint() * m)
}

fn apply_d_cols(line: &LineOperator, m: &CMat) -> CMat {
    let cols: Vec<CVec> = (0..m.ncols()).map(|j| line.apply_d(&m.column(j).into_owned())).collect();
    columns(&cols, line.dim())
}

/// Orthonormal column basis of a tall matrix from its thin SVD.
fn tall_range(m: &CMat, rel: f64) -> CMat {
    if m.ncols() == 0 {
        return linalg::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let top = svd.singular_values.max();
    let cols: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > rel * top).collect();
    linalg::select_columns(&u, &cols)
}

fn degree_split(line: &LineOperator, e: &CMat) -> (CMat, CMat) {
    let p0: Vec<CVec> = (0..e.ncols()).map(|j| line.degree_zero_part(&e.column(j).into_owned())).collect();
    let p0 = columns(&p0, line.dim());
    let p1 = e - &p0;
    (tall_range(&p0, 1e-8), tall_range(&p1, 1e-8))
}

/// Extracts the band `|λ| ≤ 1` of `R·D_{R,T}` and compares it with the scaled model.
pub fn extract_small_complex(op: &GluedOperator) -> Result<SmallComplex> {
    let line = &op.line;
    let (r, t) = (op.spec.r_half, op.spec.t);
    let (vals, vecs) = line.matrix.eigenpairs_in(-1.0, 1.0 + 1e-14)?;
    let expected = model_small_count(op);
    if vals.len() != expected {
        return Err(Error::Numerical(format!("small band has {} eigenvalues, the model predicts {expected}", vals.len())));
    }
    let e = columns(&vecs, line.dim());
    let (e0, e1) = degree_split(line, &e);
    let de0 = apply_d_cols(line, &e0);
    let d = e1.adjoint() * &de0;
    let band_invariance = linalg::max_abs(&(&de0 - project(&e1, &de0)));
    let d_squared = linalg::max_abs(&apply_d_cols(line, &project(&e, &de0)));

    let pd = model_pair(op)?;
    let variant = Variant::scaled(r, t);
    let cs = mv_model::build_complexes(&pd, &variant)?;
    let c0 = &cs[0];
    let hw = c0.metric.mats()[0].clone();
    let hv = c0.metric.mats()[1].clone();
    let partial = linalg::hstack(&[&(-&pd.tau1[0]), &pd.tau2[0]]);

    let ktol = 1e-9;
    let mut small_nonzero: Vec<f64> = vals.iter().copied().filter(|v| v.abs() > ktol).collect();
    small_nonzero.sort_by(f64::total_cmp);
    let (_, hw_isqrt) = linalg::sqrt_and_inv_sqrt(&hw)?;
    let (hv_sqrt, _) = linalg::sqrt_and_inv_sqrt(&hv)?;
    // singular values of the scaled model differential in h^C_{R,T}
    let mut model_nonzero: Vec<f64> = linalg::singular_values(&(&hv_sqrt * &c0.cx.diff()[0] * &hw_isqrt))
        .into_iter()
        .filter(|&x| x > 0.0)
        .flat_map(|x| [-r * x, r * x])
        .collect();
    model_nonzero.sort_by(f64::total_cmp);
    let eigen_rel_err = if small_nonzero.len() == model_nonzero.len() {
        small_nonzero.iter().zip(&model_nonzero).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };

    let (g, iv) = trial_sections(op);
    let s0 = project(&e, &g);
    let s1 = project(&e, &iv);
    let h = linalg::block_diag(&[&hw, &hv]);
    let (_, h_isqrt) = linalg::sqrt_and_inv_sqrt(&h)?;
    let s = linalg::hstack(&[&s0, &s1]);
    let gram = linalg::hermitian_part(&(&h_isqrt * (s.adjoint() * &s) * &h_isqrt));
    let ratios = linalg::herm_eigvals(&gram);
    let metric_ratio_err = ratios.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    let sv = linalg::singular_values(&(&s * &h_isqrt));
    let condition = sv.iter().copied().fold(0.0, f64::max) / sv.iter().copied().fold(f64::INFINITY, f64::min);

    let ds0 = apply_d_cols(line, &s0);
    let x = linalg::lstsq(&s1, &ds0)?;
    let c = t.sqrt() * (-t).exp() / (PI.sqrt() * r);
    let diff = hv_sqrt * (x.scale(1.0 / c) - &partial) * hw_isqrt;
    let derham_ratio_err = linalg::singular_values(&diff).into_iter().fold(0.0, f64::max);

    let report = SmallComplexReport {
        r,
        t,
        dim0: e0.ncols(),
        dim1: e1.ncols(),
        small_nonzero,
        model_nonzero,
        eigen_rel_err,
        condition,
        metric_ratio_err,
        derham_ratio_err,
        d_squared,
        band_invariance,
    };
    Ok(SmallComplex { e0, e1, d, s0, s1, report })
}

/// One mode block of the cylinder: `Rμ ĉc + c ∂_s + T f′_T ĉ` on `[−1, 1]`
/// with free endpoint values, acting on a `multiplicity`-dimensional eigenspace of `Y`.
#[derive(Clone, Debug)]
pub struct CylinderBlock {
    pub mu: f64,
    pub multiplicity: usize,
    pub op: LineOperator,
}

pub fn cylinder_blocks(y_spectrum: &[(f64, usize)], r_half: f64, t: f64, n: usize) -> Result<Vec<CylinderBlock>> {
    if n < (50.0 * t.max(1.0)).ceil() as usize {
        return Err(Error::GridTooCoarse(format!("N = {n} is below 50·max(1, T) for T = {t}")));
    }
    y_spectrum
        .iter()
        .map(|&(mu, m)| {
            if m == 0 || !mu.is_finite() {
                return Err(Error::InvalidArgument(format!("bad Y eigenvalue ({mu}, {m})")));
            }
            let id = linalg::eye(m);
            let op = LineOperator::assemble(witten::interval_spec(m, &id, &id, t, n, r_half * mu))?;
            Ok(CylinderBlock { mu, multiplicity: m, op })
        })
        .collect()
}

/// `C_α(a, b, s)`: the convex envelope through `a` at `s = −1` and `b` at `s = 1`
/// built from `e^{±α s}`.
pub fn c_alpha(alpha: f64, a: f64, b: f64, s: f64) -> f64 {
    let q = (-2.0 * alpha).exp();
    ((a - b * q) * (alpha * (-s - 1.0)).exp() + (b - a * q) * (alpha * (s - 1.0)).exp()) / (1.0 - q * q)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayReport {
    pub checked: usize,
    pub violations: usize,
    pub worst_ratio: f64,
    /// `‖ω₀‖² / max(‖ω_{−1}‖², ‖ω₁‖²)`.
    pub mid_ratio: f64,
    pub skipped: Option<String>,
}

/// Checks `‖ω_s‖² ≤ (1 + slack) C_{αR}(‖ω_{−1}‖², ‖ω₁‖², s)` at every vertex
/// of a section of a cylinder block solving `(D − λ)ω = 0` in the interior.
pub fn check_nz_decay(block: &CylinderBlock, y: &CVec, lambda: f64, alpha: f64, r_half: f64, slack: f64) -> DecayReport {
    if lambda.abs() > r_half.sqrt() {
        return DecayReport {
            checked: 0,
            violations: 0,
            worst_ratio: 0.0,
            mid_ratio: f64::NAN,
            skipped: Some(format!("|λ| = {} exceeds √R = {}", lambda.abs(), r_half.sqrt())),
        };
    }
    let norms = pointwise_vertex_norms(&block.op, y);
    let nv = norms.len();
    let (a, b) = (norms[0], norms[nv - 1]);
    let floor = 1e-14 * norms.iter().copied().fold(0.0, f64::max);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (j, &v) in norms.iter().enumerate() {
        let s = block.op.spec.vertex_x(j);
        let env = c_alpha(alpha * r_half, a, b, s);
        let ratio = v / env.max(floor);
        worst = worst.max(ratio);
        if v > (1.0 + slack) * env + floor {
            violations += 1;
        }
    }
    DecayReport { checked: nv, violations, worst_ratio: worst, mid_ratio: norms[nv / 2] / a.max(b), skipped: None }
}

/// `‖ω‖²` at vertices with the `du`-part averaged from the adjacent edges.
pub fn pointwise_vertex_norms(op: &LineOperator, y: &CVec) -> Vec<f64> {
    op.pointwise_norms(y)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairingReport {
    pub mean: C64,
    pub max_deviation: f64,
    pub samples: usize,
}

/// `⟨c ω, ω⟩ = 2i Im⟨a, b⟩` at each sample for `ω = a + b du`.
pub fn zm_pairing_values(a: &[CVec], b: &[CVec]) -> Vec<C64> {
    a.iter()
        .zip(b)
        .map(|(a, b)| {
            // c(a, b) = (−b, a)
            -b.dotc(a) + a.dotc(b)
        })
        .collect()
}

fn pairing_report(vals: &[C64]) -> PairingReport {
    let n = vals.len().max(1) as f64;
    let mean = vals.iter().sum::<C64>() / C64::new(n, 0.0);
    let max_deviation = vals.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
    PairingReport { mean, max_deviation, samples: vals.len() }
}

/// Pairing sampled at edge midpoints, where the function part is the average
/// of the two vertex values.
pub fn check_zm_pairing(op: &LineOperator, y: &CVec) -> PairingReport {
    let ne = op.n_edges();
    let nv = op.n_vertices();
    let a: Vec<CVec> = (0..ne)
        .map(|e| (op.vertex_value(y, e) + op.vertex_value(y, (e + 1) % nv)) * C64::new(0.5, 0.0))
        .collect();
    let b: Vec<CVec> = (0..ne).map(|e| op.edge_value(y, e)).collect();
    pairing_report(&zm_pairing_values(&a, &b))
}

/// Pairing of sampled values, for analytic sections.
pub fn pairing_of_values(a: &[CVec], b: &[CVec]) -> PairingReport {
    pairing_report(&zm_pairing_values(a, b))
}
