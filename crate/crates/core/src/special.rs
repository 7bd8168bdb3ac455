//! Exponential test functions built from the spherical mean of `e^{x·ω}`.
//!
//! `φ₁(x) = ∫_{S^{n-1}} e^{x·ω} dω` is radial, positive, and satisfies
//! `Δφ₁ = φ₁`. Reducing to the polar angle gives
//!
//! ```text
//! φ₁(r) = |S^{n-2}| ∫₀^π e^{r cos θ} sin^{n-2} θ dθ
//! ```
//!
//! with `|S⁰| = 2`, so `n = 2` is `2π I₀(r)`. The angular integral is evaluated
//! in scaled form `φ₁(r) e^{-r}` with `cos θ - 1 = -2 sin²(θ/2)`, which stays
//! `O(r^{-(n-1)/2})` and never overflows.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{self, AdaptiveTol, GaussLegendre};

/// Default order of the angular Gauss–Legendre rule.
pub const DEFAULT_ORDER: usize = 64;
/// Smallest angular order accepted.
pub const MIN_ORDER: usize = 16;

/// Radii above which `e^r` is no longer representable as a finite `f64`.
const EXP_OVERFLOW: f64 = 709.0;

/// Surface area of the unit sphere `S^k ⊂ R^{k+1}`.
pub fn sphere_area(k: u32) -> f64 {
    let (mut area, mut j) = if k.is_multiple_of(2) { (2.0, 0) } else { (2.0 * PI, 1) };
    while j < k {
        j += 2;
        area *= 2.0 * PI / f64::from(j - 1);
    }
    area
}

/// Volume of the unit ball in `R^n`.
pub fn ball_volume(n: u32) -> f64 {
    sphere_area(n - 1) / f64::from(n)
}

/// Immutable evaluation context shared by the test functions.
#[derive(Debug, Clone)]
pub struct TestFunctionContext {
    n: u32,
    order: usize,
    rule: GaussLegendre,
    polar_area: f64,
    /// Exponent `p`; needed by `ψ₂` and the Hölder-conjugate integral.
    pub p: Option<f64>,
    /// Hubble constant; needed by `ψ₂`.
    pub hubble: Option<f64>,
}

impl TestFunctionContext {
    pub fn new(n: u32, order: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation(format!("dimension n = {n} must be >= 2")));
        }
        if order < MIN_ORDER {
            return Err(Error::validation(format!(
                "quadrature order {order} below minimum {MIN_ORDER}"
            )));
        }
        Ok(TestFunctionContext {
            n,
            order,
            rule: GaussLegendre::new(order),
            polar_area: sphere_area(n - 2),
            p: None,
            hubble: None,
        })
    }

    pub fn with_exponent(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_hubble(mut self, hubble: f64) -> Self {
        self.hubble = Some(hubble);
        self
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `φ₁(r) e^{-r}`.
    pub fn phi1_scaled(&self, r: f64) -> f64 {
        if r == 0.0 {
            return sphere_area(self.n - 1);
        }
        let k = self.n - 2;
        let integrand = |theta: f64| {
            let s = (0.5 * theta).sin();
            let weight = if k == 0 { 1.0 } else { theta.sin().powi(k as i32) };
            (-2.0 * r * s * s).exp() * weight
        };
        let tol = AdaptiveTol { rel: 1e-14, abs: 0.0, max_depth: 20 };
        // Smooth positive integrand: non-convergence only means the rounding
        // floor was hit, and the accumulated value is still the best estimate.
        let value = match quad::adaptive(&self.rule, &integrand, 0.0, PI, tol) {
            Ok(q) => q.value,
            Err(_) => self.rule.integrate(&integrand, 0.0, PI),
        };
        self.polar_area * value
    }

    /// `φ₁(r)`; fails instead of saturating once `e^r` overflows.
    pub fn phi1(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("radius r = {r} must be >= 0")));
        }
        if r > EXP_OVERFLOW {
            return Err(Error::Overflow(format!("phi1({r})")));
        }
        let v = self.phi1_scaled(r) * r.exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow(format!("phi1({r})")))
        }
    }

    /// `ψ₁(t, r) = e^{-t} φ₁(r)`.
    pub fn psi1(&self, t: f64, r: f64) -> Result<f64> {
        check_time_radius(t, r)?;
        scaled_exp(r - t, self.phi1_scaled(r))
    }

    /// Decay rate of `ψ₂`: `n(p-1)H/(2p) + 1`.
    pub fn psi2_rate(&self) -> Result<f64> {
        let p = self.p.ok_or_else(|| Error::domain("psi2 needs an exponent p"))?;
        let h = self.hubble.ok_or_else(|| Error::domain("psi2 needs a Hubble constant"))?;
        if !(p > 1.0) {
            return Err(Error::domain(format!("p = {p} must be > 1")));
        }
        if !(h > 0.0) {
            return Err(Error::domain(format!("psi2 is only defined for H > 0, got {h}")));
        }
        Ok(f64::from(self.n) * (p - 1.0) * h / (2.0 * p) + 1.0)
    }

    /// `ψ₂(t, r) = e^{-(n(p-1)H/(2p) + 1)t} φ₁(r)`.
    pub fn psi2(&self, t: f64, r: f64) -> Result<f64> {
        let rate = self.psi2_rate()?;
        check_time_radius(t, r)?;
        scaled_exp(r - rate * t, self.phi1_scaled(r))
    }

    /// `φ₁(r) r^{(n-1)/2} e^{-r}`, which tends to the constant of the
    /// large-radius asymptotics.
    pub fn asymptotic_constant(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain(format!("radius r = {r} must be > 0")));
        }
        Ok(self.phi1_scaled(r) * r.powf(0.5 * f64::from(self.n - 1)))
    }

    /// `∫_{|x| ≤ t+1} ψ₁(t, x)^{p/(p-1)} dx`.
    pub fn lemma23_integral(&self, t: f64) -> Result<f64> {
        self.lemma23_integral_to(t, t + 1.0)
    }

    /// The same integral over the ball of the given radius.
    pub fn lemma23_integral_to(&self, t: f64, radius: f64) -> Result<f64> {
        let p = self.p.ok_or_else(|| Error::domain("lemma23 integral needs an exponent p"))?;
        if !(p > 1.0) {
            return Err(Error::domain(format!("p = {p} must be > 1")));
        }
        check_time_radius(t, radius)?;
        let conj = p / (p - 1.0);
        let dim = self.n as i32 - 1;
        let integrand = |r: f64| {
            let psi = ((r - t).exp() * self.phi1_scaled(r)).powf(conj);
            psi * r.powi(dim)
        };
        let tol = AdaptiveTol { rel: 1e-11, abs: 0.0, max_depth: 30 };
        let q = quad::adaptive(&self.rule, &integrand, 0.0, radius, tol)?;
        Ok(sphere_area(self.n - 1) * q.value)
    }

    /// Largest relative change in `φ₁` on `[0, r_max]` when the angular order
    /// is doubled.
    pub fn order_doubling_gap(&self, r_max: f64, samples: usize) -> Result<f64> {
        let fine = TestFunctionContext::new(self.n, 2 * self.order)?;
        let mut worst = 0.0f64;
        for i in 0..=samples {
            let r = r_max * i as f64 / samples as f64;
            let a = self.phi1_scaled(r);
            let b = fine.phi1_scaled(r);
            worst = worst.max(((a - b) / b).abs());
        }
        Ok(worst)
    }

    /// Residual of `Δφ₁ = φ₁` on the given grid; see [`eigen_residual`].
    pub fn verify_eigenfunction(&self, r_grid: &[f64]) -> Result<EigenResidual> {
        let values: Vec<f64> =
            r_grid.iter().map(|&r| self.phi1(r)).collect::<Result<Vec<_>>>()?;
        eigen_residual(&values, r_grid, self.n)
    }
}

fn check_time_radius(t: f64, r: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time t = {t} must be >= 0")));
    }
    if !(r >= 0.0) {
        return Err(Error::domain(format!("radius r = {r} must be >= 0")));
    }
    Ok(())
}

fn scaled_exp(exponent: f64, scaled: f64) -> Result<f64> {
    let v = exponent.exp() * scaled;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("exp({exponent})")))
    }
}

/// Outcome of a finite-difference eigenfunction check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenResidual {
    /// `max_i |f'' + (n-1)/r f' - f| / |f|` over interior nodes.
    pub max_residual: f64,
    pub spacing: f64,
    /// Set when the spacing exceeds 0.1, where the check is not meaningful.
    pub coarse: bool,
}

/// Relative residual of `Δf = f` for radial samples on a uniform grid, using
/// centered differences.
pub fn eigen_residual(values: &[f64], r_grid: &[f64], n: u32) -> Result<EigenResidual> {
    if values.len() != r_grid.len() {
        return Err(Error::validation("values and grid lengths differ"));
    }
    if r_grid.len() < 3 {
        return Err(Error::validation("need at least three grid points"));
    }
    let h = r_grid[1] - r_grid[0];
    if !(h > 0.0) {
        return Err(Error::validation("grid must be increasing"));
    }
    for w in r_grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(w[1].abs()) {
            return Err(Error::validation("grid must be uniform"));
        }
    }
    if r_grid[0] <= 0.0 {
        return Err(Error::validation("grid must avoid r = 0"));
    }
    let nm1 = f64::from(n) - 1.0;
    let mut worst = 0.0f64;
    for i in 1..values.len() - 1 {
        let r = r_grid[i];
        let d2 = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        let d1 = (values[i + 1] - values[i - 1]) / (2.0 * h);
        let res = (d2 + nm1 / r * d1 - values[i]).abs() / values[i].abs();
        worst = worst.max(res);
    }
    Ok(EigenResidual { max_residual: worst, spacing: h, coarse: h > 0.1 })
}

/// Uniform grid on `[lo, hi]` with spacing close to `h`, shifted by half a
/// cell so that it never contains the origin.
pub fn half_offset_grid(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let start = (lo / h - 0.5).floor().max(0.0) as usize;
    let mut out = Vec::new();
    let mut i = start;
    loop {
        let r = (i as f64 + 0.5) * h;
        if r > hi {
            break;
        }
        if r >= lo {
            out.push(r);
        }
        i += 1;
    }
    out
}
