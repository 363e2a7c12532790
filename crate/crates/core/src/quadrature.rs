//! Gauss–Legendre rules and composite panel integration.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n` from the Chebyshev-like initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A fixed Gauss–Legendre rule reused over many panels.
#[derive(Clone, Debug)]
pub struct GlRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GlRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + r * x, r * w))
    }

    /// `∫_a^b f` with a single panel.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// `∫_a^b f` over `panels` equal panels, for vector-valued integrands.
    pub fn integrate_vec(&self, a: f64, b: f64, panels: usize, dim: usize, f: &dyn Fn(f64) -> Vec<f64>) -> Vec<f64> {
        let mut acc = vec![0.0; dim];
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let (lo, hi) = (a + p as f64 * h, a + (p + 1) as f64 * h);
            for (x, w) in self.mapped(lo, hi) {
                for (s, v) in acc.iter_mut().zip(f(x)) {
                    *s += w * v;
                }
            }
        }
        acc
    }
}

/// Adaptive composite rule: doubles the number of equal panels until two
/// successive estimates agree to `tol` in every component.
pub struct PanelResult {
    pub value: Vec<f64>,
    pub change: f64,
    pub panels: usize,
    pub converged: bool,
}

pub fn integrate_until(
    rule: &GlRule,
    a: f64,
    b: f64,
    dim: usize,
    start_panels: usize,
    max_panels: usize,
    tol: f64,
    f: &dyn Fn(f64) -> Vec<f64>,
) -> PanelResult {
    let mut panels = start_panels.max(1);
    let mut prev = rule.integrate_vec(a, b, panels, dim, f);
    loop {
        let next_panels = panels * 2;
        let next = rule.integrate_vec(a, b, next_panels, dim, f);
        let change = prev.iter().zip(&next).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if change < tol || next_panels >= max_panels {
            return PanelResult { value: next, change, panels: next_panels, converged: change < tol };
        }
        prev = next;
        panels = next_panels;
    }
}
