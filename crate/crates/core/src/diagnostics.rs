//! Spatial functionals along a run and the differential inequalities they
//! are expected to satisfy.
//!
//! `G(t) = ∫ u dx` and `G₁(t) = ∫ ψ₂ u dx` are evaluated with the solver's
//! shell-volume quadrature. `G''` is never obtained by differencing: it is
//! the quadrature of the right-hand side, which equals the quadrature of the
//! source term because the flux-form Laplacian telescopes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Nonlinearity};
use crate::solver::{RadialOperator, WaveState};
use crate::special::{TestFunctionContext, DEFAULT_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub t: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    #[serde(rename = "G")]
    pub g: f64,
    /// `G' = ∫ u_t dx`.
    #[serde(rename = "Gp")]
    pub gp: f64,
    #[serde(rename = "Gpp")]
    pub gpp: f64,
    #[serde(rename = "G1")]
    pub g1: Option<f64>,
    pub energy: f64,
    pub lp_u: f64,
    pub lp_v: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FunctionalSeries {
    pub sample_dt: f64,
    pub samples: Vec<FunctionalSample>,
}

impl FunctionalSeries {
    pub fn new(sample_dt: f64) -> Self {
        FunctionalSeries { sample_dt, samples: Vec::new() }
    }

    pub fn push(&mut self, sample: FunctionalSample) {
        debug_assert!(self.last_time().is_none_or(|t| sample.t > t));
        self.samples.push(sample);
    }

    pub fn last_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times_strictly_increasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].t > w[0].t)
    }
}

/// `G = ∫ u dx`.
pub fn functional_g(state: &WaveState, op: &RadialOperator) -> f64 {
    op.integrate(&state.u)
}

/// `(∫ |f|^p dx)^{1/p}`.
pub fn lp_norm(f: &[f64], op: &RadialOperator, p: f64) -> f64 {
    let s: f64 = op.volumes.iter().zip(f).map(|(w, x)| w * x.abs().powf(p)).sum();
    (op.area * s).powf(1.0 / p)
}

/// `φ₁` sampled at the grid nodes, for pairing against `ψ₂`.
#[derive(Debug, Clone)]
pub struct Pairing {
    phi: Vec<f64>,
    rate: f64,
}

impl Pairing {
    pub fn new(op: &RadialOperator, params: &ModelParams) -> Result<Self> {
        let ctx = TestFunctionContext::new(params.n, DEFAULT_ORDER)?
            .with_exponent(params.p)
            .with_hubble(params.hubble);
        let rate = ctx.psi2_rate()?;
        let phi = op.grid.nodes().iter().map(|&r| ctx.phi1(r)).collect::<Result<Vec<_>>>()?;
        Ok(Pairing { phi, rate })
    }

    /// `∫ ψ₂(t, x) u(t, x) dx`.
    pub fn functional_g1(&self, state: &WaveState, op: &RadialOperator) -> f64 {
        (-self.rate * state.t).exp() * op.integrate_product(&self.phi, &state.u)
    }
}

/// `G₁(t) = ∫ ψ₂ u dx`; defined for `PowerU` with `H > 0`.
pub fn functional_g1(state: &WaveState, op: &RadialOperator, params: &ModelParams) -> Result<f64> {
    if params.kind != Nonlinearity::PowerU {
        return Err(Error::domain("G1 is defined for the |u|^p equation only"));
    }
    if !(params.hubble > 0.0) {
        return Err(Error::domain("G1 needs H > 0"));
    }
    Ok(Pairing::new(op, params)?.functional_g1(state, op))
}

/// Measured lower constants of the ODE inequalities along a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `(t, ρ(t))` with `ρ = G''/(e^{-n(p-1)t} G^p)` for `PowerU` and
    /// `ρ = G''/(e^{-n(p-1)Ht} |G'|^p)` for `PowerGrad`.
    pub ratios: Vec<(f64, f64)>,
    /// Empirical constant: `inf ρ`.
    pub inf_ratio: f64,
    /// Sample times at which `G ≤ 0`, outside the setting of the estimates.
    pub nonpositive_mass_times: Vec<f64>,
}

/// Kind-appropriate inequality ratio for a single sample.
pub fn inequality_ratio(sample: &FunctionalSample, params: &ModelParams) -> f64 {
    let n = f64::from(params.n);
    let p = params.p;
    match params.kind {
        Nonlinearity::PowerGrad => {
            let weight = (-n * (p - 1.0) * params.hubble * sample.t).exp();
            sample.gpp / (weight * sample.gp.abs().powf(p))
        }
        _ => {
            let weight = (-n * (p - 1.0) * sample.t).exp();
            sample.gpp / (weight * sample.g.abs().powf(p))
        }
    }
}

pub fn inequality_residuals(series: &FunctionalSeries, params: &ModelParams) -> Result<ResidualReport> {
    if series.is_empty() {
        return Err(Error::validation("empty series"));
    }
    let mut ratios = Vec::with_capacity(series.len());
    let mut bad = Vec::new();
    for s in &series.samples {
        if s.g <= 0.0 {
            bad.push(s.t);
        }
        ratios.push((s.t, inequality_ratio(s, params)));
    }
    let inf_ratio = ratios
        .iter()
        .map(|&(_, r)| r)
        .filter(|r| r.is_finite())
        .fold(f64::INFINITY, f64::min);
    Ok(ResidualReport { ratios, inf_ratio, nonpositive_mass_times: bad })
}

/// Number of samples whose second divided difference of `G` falls below
/// `-tol`, with `tol = 1e-8 · max|G''|`, raised where needed to the rounding
/// level of the difference itself.
pub fn convexity_check(series: &FunctionalSeries) -> Result<usize> {
    let s = &series.samples;
    if s.len() < 3 {
        return Err(Error::validation("convexity check needs at least three samples"));
    }
    let max_gpp = s.iter().fold(0.0f64, |acc, x| acc.max(x.gpp.abs()));
    let tol = 1e-8 * max_gpp;
    let count = s
        .windows(3)
        .filter(|w| {
            let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
            let d1 = (w[1].g - w[0].g) / h1;
            let d2 = (w[2].g - w[1].g) / h2;
            let second = 2.0 * (d2 - d1) / (w[2].t - w[0].t);
            let magnitude = w[0].g.abs() + 2.0 * w[1].g.abs() + w[2].g.abs();
            let rounding = 16.0 * f64::EPSILON * magnitude / (h1.min(h2) * (w[2].t - w[0].t));
            second < -tol.max(rounding)
        })
        .count();
    Ok(count)
}

/// Least-squares slope of `log G` against `log(1 + t)` on samples with
/// `t ∈ [t_lo, t_hi]` and `G > 0`.
pub fn growth_exponent(series: &FunctionalSeries, t_lo: f64, t_hi: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .samples
        .iter()
        .filter(|s| s.t >= t_lo && s.t <= t_hi && s.g > 0.0)
        .map(|s| ((1.0 + s.t).ln(), s.g.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::validation("growth fit needs at least three samples"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::RadialGrid;
    use std::f64::consts::PI;

    fn sample(t: f64, g: f64) -> FunctionalSample {
        FunctionalSample {
            t,
            sup_u: 0.0,
            sup_v: 0.0,
            g,
            gp: 0.0,
            gpp: 1.0,
            g1: None,
            energy: 0.0,
            lp_u: 0.0,
            lp_v: 0.0,
        }
    }

    #[test]
    fn mass_of_unit_ball() {
        let grid = RadialGrid::new(1.0, 2048).unwrap();
        let op = RadialOperator::new(grid, 3).unwrap();
        let state = WaveState { t: 0.0, u: vec![1.0; 2048], v: vec![0.0; 2048] };
        let g = functional_g(&state, &op);
        assert!((g - 4.0 * PI / 3.0).abs() < 1e-6);
    }

    #[test]
    fn mass_is_linear_in_amplitude() {
        let grid = RadialGrid::new(2.0, 512).unwrap();
        let op = RadialOperator::new(grid, 3).unwrap();
        let a = crate::solver::make_initial_state(
            &crate::solver::InitialDataSpec::with_epsilon(0.3),
            &grid,
        )
        .unwrap();
        let b = crate::solver::make_initial_state(
            &crate::solver::InitialDataSpec::with_epsilon(0.6),
            &grid,
        )
        .unwrap();
        assert!((2.0 * functional_g(&a, &op) - functional_g(&b, &op)).abs() < 1e-14);
    }

    #[test]
    fn mass_converges_at_second_order() {
        let exact = |r: f64| (-r * r).exp();
        // ∫ e^{-r²} 4π r² dr over [0, ∞) = π^{3/2}.
        let want = PI.powf(1.5);
        let err = |m: usize| {
            let grid = RadialGrid::new(8.0, m).unwrap();
            let op = RadialOperator::new(grid, 3).unwrap();
            let u: Vec<f64> = grid.nodes().iter().map(|&r| exact(r)).collect();
            let state = WaveState { t: 0.0, v: vec![0.0; m], u };
            (functional_g(&state, &op) - want).abs()
        };
        let e1 = err(257);
        let e2 = err(513);
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn g1_requires_expanding_power_u() {
        let grid = RadialGrid::new(3.0, 256).unwrap();
        let op = RadialOperator::new(grid, 3).unwrap();
        let s = WaveState::zeros(256);
        let flat = ModelParams { n: 3, hubble: 0.0, p: 2.0, kind: Nonlinearity::PowerU };
        assert!(functional_g1(&s, &op, &flat).is_err());
        let grad = ModelParams { kind: Nonlinearity::PowerGrad, hubble: 0.5, ..flat };
        assert!(functional_g1(&s, &op, &grad).is_err());
        let ok = ModelParams { hubble: 0.5, ..flat };
        assert_eq!(functional_g1(&s, &op, &ok).unwrap(), 0.0);
    }

    #[test]
    fn g1_positive_for_admissible_data() {
        let grid = RadialGrid::new(3.0, 512).unwrap();
        let op = RadialOperator::new(grid, 3).unwrap();
        let params = ModelParams { n: 3, hubble: 0.5, p: 2.0, kind: Nonlinearity::PowerU };
        let s = crate::solver::make_initial_state(&Default::default(), &grid).unwrap();
        assert!(functional_g1(&s, &op, &params).unwrap() > 0.0);
    }

    #[test]
    fn convexity_counts() {
        let convex = FunctionalSeries {
            sample_dt: 0.1,
            samples: (0..20).map(|i| sample(i as f64 * 0.1, 1.0 + (i as f64 * 0.1).powi(2))).collect(),
        };
        assert_eq!(convexity_check(&convex).unwrap(), 0);
        let mut negated = convex.clone();
        negated.samples.iter_mut().for_each(|s| s.g = -s.g);
        assert!(convexity_check(&negated).unwrap() > 0);
        let flat = FunctionalSeries {
            sample_dt: 0.1,
            samples: (0..5).map(|i| sample(i as f64, 2.0)).collect(),
        };
        assert_eq!(convexity_check(&flat).unwrap(), 0);
        let short = FunctionalSeries { sample_dt: 0.1, samples: vec![sample(0.0, 1.0)] };
        assert!(convexity_check(&short).is_err());
    }

    #[test]
    fn growth_exponent_of_power() {
        let series = FunctionalSeries {
            sample_dt: 0.1,
            samples: (0..50).map(|i| {
                let t = i as f64 * 0.1;
                sample(t, 3.0 * (1.0 + t).powf(2.5))
            })
            .collect(),
        };
        assert!((growth_exponent(&series, 0.0, 10.0).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn residuals_flag_nonpositive_mass() {
        let params = ModelParams { n: 3, hubble: 0.1, p: 2.0, kind: Nonlinearity::PowerU };
        let series = FunctionalSeries {
            sample_dt: 1.0,
            samples: vec![sample(0.0, 1.0), sample(1.0, -1.0)],
        };
        let r = inequality_residuals(&series, &params).unwrap();
        assert_eq!(r.nonpositive_mass_times, vec![1.0]);
        assert!((r.ratios[0].1 - 1.0).abs() < 1e-15);
    }
}
