//! Gauss–Legendre rules and a panel-bisecting adaptive integrator.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the `q`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(q: usize) -> Self {
        assert!(q >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; q];
        let mut weights = vec![0.0; q];
        let qf = q as f64;
        for i in 0..q.div_ceil(2) {
            // Tricomi initial guess, refined by Newton on P_q.
            let mut x = (PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(q, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(q, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[q - 1 - i] = x;
            weights[i] = w;
            weights[q - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule on `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        half * sum
    }
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if q == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = q as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Tolerances for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveTol {
    pub rel: f64,
    pub abs: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveTol {
    fn default() -> Self {
        AdaptiveTol { rel: 1e-13, abs: 0.0, max_depth: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the accepted panel error estimates.
    pub error: f64,
    pub panels: usize,
}

/// Integrates `f` over `[a, b]`.
///
/// The whole interval is tried first with the fixed rule; a panel is accepted
/// once the rule on the panel agrees with the rule on its two halves (or the
/// two differ only by rounding), and is bisected otherwise.
pub fn adaptive<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    tol: AdaptiveTol,
) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, panels: 0 });
    }
    let whole = rule.integrate(f, a, b);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = 0;
    let mut worst = 0.0f64;
    let mut scale = whole.abs();
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(f, lo, mid);
        let right = rule.integrate(f, mid, hi);
        let fine = left + right;
        let diff = (fine - coarse).abs();
        scale = scale.max(fine.abs());
        let allowed = (tol.rel * scale).max(tol.abs) * ((hi - lo) / (b - a)).abs();
        // Below this the two estimates differ only by rounding.
        let noise = 64.0 * f64::EPSILON * (left.abs() + right.abs());
        if diff <= allowed.max(noise) {
            value += fine;
            error += diff;
            panels += 2;
        } else if depth >= tol.max_depth {
            worst = worst.max(diff);
            value += fine;
            error += diff;
            panels += 2;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    if !value.is_finite() {
        return Err(Error::Numerical("non-finite quadrature value".into()));
    }
    if worst > 0.0 {
        let requested = (tol.rel * value.abs()).max(tol.abs);
        if error > requested {
            return Err(Error::Quadrature { achieved: error, requested });
        }
    }
    Ok(Quadrature { value, error, panels })
}
