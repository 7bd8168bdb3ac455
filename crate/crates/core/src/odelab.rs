//! Kato-type ODE blow-up criteria.
//!
//! The comparison ODE is
//!
//! ```text
//! G''(t) = A e^{-b₁(t+R)} |G(t)|^p,   G(0) = G₀ > 0,   G'(0) = G₀' > 0
//! ```
//!
//! integrated by an embedded Dormand–Prince 5(4) pair. Close to blow-up the
//! error controller shrinks the step geometrically, and the singular time is
//! extrapolated from `G^{-(p-1)/2}`, which vanishes linearly there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::parallel_map;
use crate::quad::{self, AdaptiveTol, GaussLegendre};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatoProblem {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub b1: f64,
    #[serde(rename = "R")]
    pub shift: f64,
    pub p: f64,
    #[serde(rename = "G0")]
    pub g0: f64,
    #[serde(rename = "G0p")]
    pub g0p: f64,
}

impl KatoProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::validation(format!("A = {} must be >= 0", self.amplitude)));
        }
        if !self.b1.is_finite() {
            return Err(Error::validation("b1 must be finite"));
        }
        if !(self.shift >= 0.0) {
            return Err(Error::validation(format!("R = {} must be >= 0", self.shift)));
        }
        if !(self.p > 1.0) {
            return Err(Error::validation(format!("p = {} must be > 1", self.p)));
        }
        if !(self.g0 > 0.0 && self.g0p > 0.0) {
            return Err(Error::validation("G(0) and G'(0) must be positive"));
        }
        Ok(())
    }

    /// `A e^{-b₁(t+R)}`.
    pub fn coefficient(&self, t: f64) -> f64 {
        self.amplitude * (-self.b1 * (t + self.shift)).exp()
    }

    fn accel(&self, t: f64, g: f64) -> f64 {
        self.coefficient(t) * g.abs().powf(self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeControls {
    pub t_max: f64,
    /// Blow-up threshold on `G`.
    pub g_max: f64,
    /// First trial step.
    pub h0: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OdeControls {
    fn default() -> Self {
        OdeControls { t_max: 100.0, g_max: 1e12, h0: 1e-3, rtol: 1e-12, atol: 1e-14 }
    }
}

impl OdeControls {
    pub fn with_t_max(t_max: f64) -> Self {
        OdeControls { t_max, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.g_max > 0.0 && self.h0 > 0.0 && self.rtol > 0.0) {
            return Err(Error::validation("ODE controls must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OdeOutcome {
    BlewUp { t_star: f64 },
    Survived,
    Failure,
}

impl OdeOutcome {
    pub fn blew_up(&self) -> bool {
        matches!(self, OdeOutcome::BlewUp { .. })
    }

    pub fn t_star(&self) -> Option<f64> {
        match *self {
            OdeOutcome::BlewUp { t_star } => Some(t_star),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OdeOutcome::BlewUp { .. } => "BlewUp",
            OdeOutcome::Survived => "Survived",
            OdeOutcome::Failure => "Failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "Gp")]
    pub gp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoRun {
    pub outcome: OdeOutcome,
    pub trajectory: Vec<TrajectoryPoint>,
    pub steps: usize,
    pub rejected: usize,
    /// `∫ A e^{-b₁(t+R)} G^p dt` along the accepted trajectory (trapezoid).
    pub impulse: f64,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dp_step(prob: &KatoProblem, t: f64, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
    let mut k = [[0.0; 2]; 7];
    for i in 0..7 {
        let mut yi = y;
        for j in 0..i {
            yi[0] += h * A[i][j] * k[j][0];
            yi[1] += h * A[i][j] * k[j][1];
        }
        k[i] = [yi[1], prob.accel(t + C[i] * h, yi[0])];
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for i in 0..7 {
        for c in 0..2 {
            y5[c] += h * B5[i] * k[i][c];
            err[c] += h * (B5[i] - B4[i]) * k[i][c];
        }
    }
    (y5, err)
}

const EXTRAPOLATION_WINDOW: usize = 10;

/// Integrates the equality case of the criterion until `G > g_max`
/// (blow-up), `t_max` (survival) or step-size underflow (failure).
pub fn integrate_kato_ode(prob: &KatoProblem, controls: &OdeControls) -> Result<KatoRun> {
    prob.validate()?;
    controls.validate()?;
    let p = prob.p;
    let monitor = |g: f64| g.powf(-(p - 1.0) / 2.0);
    let mut t = 0.0;
    let mut y = [prob.g0, prob.g0p];
    let mut h = controls.h0.min(controls.t_max);
    let mut trajectory = vec![TrajectoryPoint { t, g: y[0], gp: y[1] }];
    let mut tail: Vec<(f64, f64)> = vec![(t, monitor(y[0]))];
    let mut steps = 0;
    let mut rejected = 0;
    let mut impulse = 0.0;
    let mut force_prev = prob.accel(t, y[0]);

    let outcome = loop {
        if y[0] > controls.g_max {
            let t_star = extrapolate_zero(&tail).unwrap_or(t).max(t);
            break OdeOutcome::BlewUp { t_star };
        }
        if t >= controls.t_max * (1.0 - 1e-14) {
            break OdeOutcome::Survived;
        }
        h = h.min(controls.t_max - t);
        if h <= 1e-15 * t.max(1.0) {
            break OdeOutcome::Failure;
        }
        let (y_new, err) = dp_step(prob, t, y, h);
        let mut norm = 0.0f64;
        for c in 0..2 {
            let scale = controls.atol + controls.rtol * y[c].abs().max(y_new[c].abs());
            norm = norm.max(err[c].abs() / scale);
        }
        if !norm.is_finite() || !y_new.iter().all(|x| x.is_finite()) {
            rejected += 1;
            h *= 0.25;
            continue;
        }
        if norm <= 1.0 {
            let t_new = t + h;
            let force = prob.accel(t_new, y_new[0]);
            impulse += 0.5 * h * (force_prev + force);
            force_prev = force;
            t = t_new;
            y = y_new;
            steps += 1;
            trajectory.push(TrajectoryPoint { t, g: y[0], gp: y[1] });
            tail.push((t, monitor(y[0])));
            if tail.len() > EXTRAPOLATION_WINDOW {
                tail.remove(0);
            }
            let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            rejected += 1;
            h *= (0.9 * norm.powf(-0.2)).clamp(0.1, 0.5);
        }
    };
    Ok(KatoRun { outcome, trajectory, steps, rejected, impulse })
}

fn extrapolate_zero(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mw = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - mw)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    Some(mt - mw / slope)
}

/// The criterion rewritten in the rescaled variables
/// `τ = t ε^{(p-1)/κ}`, `𝒢(τ) = ε^{(b₁-2)/κ} G(τ ε^{-(p-1)/κ})`,
/// `κ = (p-1)a₁ - b₁ + 2`.
///
/// The rescaled equation is again of the form `𝒢'' = A' e^{-b₁'(τ+R')} 𝒢^p`,
/// with `A' = A ε^{-b₁(p-1)/κ}`, `b₁' = b₁ s`, `R' = R/s` and
/// `s = ε^{-(p-1)/κ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledProblem {
    pub epsilon: f64,
    pub kappa: f64,
    /// `s = ε^{-(p-1)/κ}`, so that `t = s τ`.
    pub dilation: f64,
    /// `ε^{(b₁-2)/κ}`, so that `𝒢 = σ G`.
    pub amplitude_scale: f64,
    pub original: KatoProblem,
    pub problem: KatoProblem,
}

impl RescaledProblem {
    pub fn tau_of(&self, t: f64) -> f64 {
        t / self.dilation
    }

    pub fn t_of(&self, tau: f64) -> f64 {
        tau * self.dilation
    }

    /// Coefficient of `|𝒢|^p` in the rescaled equation.
    pub fn transformed_coefficient(&self, tau: f64) -> f64 {
        self.problem.coefficient(tau)
    }

    /// `A e^{-b₁(τ+R)}`, the coefficient the rescaled problem is compared with.
    pub fn reference_coefficient(&self, tau: f64) -> f64 {
        self.original.coefficient(tau)
    }

    /// Largest `τ` up to which `transformed ≥ reference` holds, `None` when
    /// it holds for every `τ ≥ 0`. The ratio is `s^{b₁} e^{-b₁ τ (s-1)}`.
    pub fn comparison_horizon(&self) -> Option<f64> {
        let s = self.dilation;
        if self.original.b1 == 0.0 || s == 1.0 {
            return None;
        }
        if self.original.b1 < 0.0 {
            return if s > 1.0 { None } else { Some(0.0) };
        }
        Some(s.ln() / (s - 1.0))
    }
}

/// Amplitude window `[2^{-κ/(p-1)}, 1]` of the rescaling.
pub fn epsilon_window(a1: f64, b1: f64, p: f64) -> Result<(f64, f64)> {
    let kappa = (p - 1.0) * a1 - b1 + 2.0;
    if !(kappa > 0.0) {
        return Err(Error::validation(format!("(p-1)a1 - b1 + 2 = {kappa} must be > 0")));
    }
    Ok((2f64.powf(-kappa / (p - 1.0)), 1.0))
}

pub fn rescale_problem(epsilon: f64, a1: f64, prob: &KatoProblem) -> Result<RescaledProblem> {
    prob.validate()?;
    let p = prob.p;
    let b1 = prob.b1;
    let (lo, hi) = epsilon_window(a1, b1, p)?;
    if !(epsilon >= lo * (1.0 - 1e-12) && epsilon <= hi) {
        return Err(Error::validation(format!("epsilon = {epsilon} outside [{lo}, {hi}]")));
    }
    let kappa = (p - 1.0) * a1 - b1 + 2.0;
    let s = epsilon.powf(-(p - 1.0) / kappa);
    let sigma = epsilon.powf((b1 - 2.0) / kappa);
    let problem = KatoProblem {
        amplitude: prob.amplitude * sigma.powf(1.0 - p) * s * s,
        b1: b1 * s,
        shift: prob.shift / s,
        p,
        g0: sigma * prob.g0,
        g0p: sigma * s * prob.g0p,
    };
    Ok(RescaledProblem { epsilon, kappa, dilation: s, amplitude_scale: sigma, original: *prob, problem })
}

/// One member of the weight catalog: `t^power · e^{rate·t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub power: f64,
    pub rate: f64,
}

impl Weight {
    pub fn power(alpha: f64) -> Self {
        Weight { power: alpha, rate: 0.0 }
    }

    pub fn exponential(beta: f64) -> Self {
        Weight { power: 0.0, rate: beta }
    }

    pub fn product(alpha: f64, beta: f64) -> Self {
        Weight { power: alpha, rate: beta }
    }

    pub fn eval(&self, t: f64) -> f64 {
        t.powf(self.power) * (self.rate * t).exp()
    }

    fn ln_eval(&self, t: f64) -> f64 {
        self.power * t.ln() + self.rate * t
    }

    /// Positive and strictly increasing on `(0, ∞)`.
    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0 && self.rate >= 0.0) || (self.power == 0.0 && self.rate == 0.0) {
            return Err(Error::validation(format!(
                "weight t^{} e^{{{} t}} is not strictly increasing",
                self.power, self.rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedWeights {
    pub a: Weight,
    pub b: Weight,
}

impl GeneralizedWeights {
    /// `a(t) = t^{a₁}`, `b(t) = e^{b₁ t}`.
    pub fn exponential_decay(a1: f64, b1: f64) -> Self {
        GeneralizedWeights { a: Weight::power(a1), b: Weight::exponential(b1) }
    }

    pub fn validate(&self) -> Result<()> {
        self.a.validate()?;
        self.b.validate()
    }

    /// `b(t+R)^{-1/2} a(t)^{β}`.
    pub fn combined(&self, t: f64, shift: f64, beta: f64) -> f64 {
        (beta * self.a.ln_eval(t) - 0.5 * self.b.ln_eval(t + shift)).exp()
    }

    /// Samples the combined weight on `[lo, hi]` and reports whether it is
    /// strictly decreasing there.
    pub fn combined_decreasing_on(&self, lo: f64, hi: f64, shift: f64, beta: f64) -> bool {
        let n = 2000;
        let mut prev = self.combined(lo.max(f64::MIN_POSITIVE), shift, beta);
        for i in 1..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let v = self.combined(t, shift, beta);
            if !(v < prev) {
                return false;
            }
            prev = v;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatoHypothesis {
    #[serde(rename = "K")]
    pub k: f64,
    pub a1: f64,
    #[serde(rename = "T0")]
    pub t0: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    pub delta: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
}

impl KatoHypothesis {
    pub fn validate(&self, p: f64, shift: f64) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < (p - 1.0) / 2.0) {
            return Err(Error::validation(format!(
                "delta = {} outside (0, {})",
                self.delta,
                (p - 1.0) / 2.0
            )));
        }
        if self.t0 < shift {
            return Err(Error::validation(format!("T0 = {} must be >= R = {shift}", self.t0)));
        }
        if !(self.t1 > 0.0 && self.k0 > 0.0) {
            return Err(Error::validation("T1 and K0 must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityControls {
    pub t_search_max: f64,
    /// Width of the marching cells; `t**` is resolved to this granularity.
    pub cell: f64,
}

/// `∫_{2T₁}^∞` of the combined weight, bounded above by a closed-form
/// majorant for the tail beyond the search window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    /// Integral up to the end of the search window.
    pub integral_to_window: f64,
    /// Majorant of the remaining tail; `None` when the tail diverges.
    pub tail_majorant: Option<f64>,
}

impl TailBound {
    pub fn upper(&self) -> Option<f64> {
        self.tail_majorant.map(|m| self.integral_to_window + m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// Smallest cell endpoint `t** > 2T₁` satisfying the inequality.
    pub t_star: Option<f64>,
    /// `I` needed: the left side raised to `(p-1)/2`.
    pub required_integral: f64,
    pub tail: TailBound,
    /// True when the required value exceeds the bound on `I(∞)`.
    pub beyond_tail: bool,
    /// Whether the combined weight decreases on the search window.
    pub combined_decreasing: bool,
}

fn integral_rule() -> GaussLegendre {
    GaussLegendre::new(32)
}

fn integrate_segment<F: Fn(f64) -> f64>(rule: &GaussLegendre, f: &F, lo: f64, hi: f64) -> Result<f64> {
    let tol = AdaptiveTol { rel: 1e-14, abs: 0.0, max_depth: 40 };
    Ok(quad::adaptive(rule, f, lo, hi, tol)?.value)
}

fn tail_majorant<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    weights: &GeneralizedWeights,
    shift: f64,
    beta: f64,
    from: f64,
) -> Result<Option<f64>> {
    // f(s) ≤ C s^P e^{-Q s} for s > 0 since (s+R)^{-α_b/2} ≤ s^{-α_b/2}.
    let c = (-0.5 * weights.b.rate * shift).exp();
    let power = weights.a.power * beta - 0.5 * weights.b.power;
    let rate = 0.5 * weights.b.rate - weights.a.rate * beta;
    if rate < 0.0 {
        return Ok(None);
    }
    if rate == 0.0 {
        if power < -1.0 {
            return Ok(Some(c * from.powf(power + 1.0) / (-power - 1.0)));
        }
        return Ok(None);
    }
    if power <= 0.0 {
        return Ok(Some(c * from.powf(power) * (-rate * from).exp() / rate));
    }
    // For s ≥ T ≥ 2P/Q: s^P e^{-Qs} ≤ T^P e^{-QT} e^{-(Q-P/T)(s-T)}.
    let knee = from.max(2.0 * power / rate);
    let middle = if knee > from { integrate_segment(rule, f, from, knee)? } else { 0.0 };
    let far = c * knee.powf(power) * (-rate * knee).exp() / (rate - power / knee);
    Ok(Some(middle + far))
}

/// Searches for `t**` with
/// `δ^{2/(p-1)} (A/(p+1))^{1/(p-1)} K₀^{-1} a(2T₁)^{2δ/(p-1)} ≤ I(t**)^{2/(p-1)}`,
/// `I(t) = ∫_{2T₁}^t b(s+R)^{-1/2} a(s)^{(p-1)/2-δ} ds`.
pub fn lemma22_feasible(
    weights: &GeneralizedWeights,
    hyp: &KatoHypothesis,
    p: f64,
    amplitude: f64,
    shift: f64,
    controls: &FeasibilityControls,
) -> Result<Feasibility> {
    weights.validate()?;
    hyp.validate(p, shift)?;
    if !(amplitude > 0.0) {
        return Err(Error::validation("A must be positive"));
    }
    let start = 2.0 * hyp.t1;
    if !(controls.cell > 0.0 && controls.t_search_max > start) {
        return Err(Error::validation("search window must extend beyond 2 T1 with a positive cell"));
    }
    let delta = hyp.delta;
    let beta = (p - 1.0) / 2.0 - delta;
    let lhs = delta.powf(2.0 / (p - 1.0))
        * (amplitude / (p + 1.0)).powf(1.0 / (p - 1.0))
        / hyp.k0
        * weights.a.eval(start).powf(2.0 * delta / (p - 1.0));
    let required = lhs.powf((p - 1.0) / 2.0);
    let rule = integral_rule();
    let f = |s: f64| weights.combined(s, shift, beta);
    let combined_decreasing = weights.combined_decreasing_on(start, controls.t_search_max, shift, beta);

    let mut acc = 0.0;
    let mut lo = start;
    let mut t_star = None;
    while lo < controls.t_search_max {
        let hi = (lo + controls.cell).min(controls.t_search_max);
        acc += integrate_segment(&rule, &f, lo, hi)?;
        if t_star.is_none() && acc >= required {
            t_star = Some(hi);
        }
        lo = hi;
    }
    let tail = TailBound {
        integral_to_window: acc,
        tail_majorant: tail_majorant(&rule, &f, weights, shift, beta, controls.t_search_max)?,
    };
    let beyond_tail = tail.upper().is_some_and(|u| required > u);
    Ok(Feasibility { t_star, required_integral: required, tail, beyond_tail, combined_decreasing })
}

/// `∫_lo^hi e^{-b₁(s+R)/2} s^{a₁((p-1)/2-δ)} ds`, the weight integral for
/// polynomial growth against exponential decay.
pub fn lemma21_integral(a1: f64, b1: f64, shift: f64, p: f64, delta: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(hi >= lo && lo >= 0.0) {
        return Err(Error::validation("integration bounds must satisfy 0 <= lo <= hi"));
    }
    let k = a1 * ((p - 1.0) / 2.0 - delta);
    let f = |s: f64| (-0.5 * b1 * (s + shift)).exp() * s.powf(k);
    integrate_segment(&GaussLegendre::new(48), &f, lo, hi)
}

/// A `(p, b₁)` grid of criterion ODEs sharing every other parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub p_values: Vec<f64>,
    pub b1_values: Vec<f64>,
    #[serde(rename = "A")]
    pub amplitude: f64,
    #[serde(rename = "R")]
    pub shift: f64,
    #[serde(rename = "G0")]
    pub g0: f64,
    #[serde(rename = "G0p")]
    pub g0p: f64,
    pub controls: OdeControls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub p: f64,
    pub b1: f64,
    pub outcome: OdeOutcome,
    /// Set when the cell could not be integrated at all.
    pub error: Option<String>,
}

impl RegionCell {
    pub fn status(&self) -> &'static str {
        if self.error.is_some() {
            "Error"
        } else {
            self.outcome.label()
        }
    }
}

/// Classifies every cell; cells are returned in row-major `(p, b₁)` order
/// regardless of completion order.
pub fn blowup_region_map(grid: &RegionGrid, workers: usize) -> Vec<RegionCell> {
    let nb = grid.b1_values.len();
    let count = grid.p_values.len() * nb;
    parallel_map(count, workers, |idx| {
        let p = grid.p_values[idx / nb];
        let b1 = grid.b1_values[idx % nb];
        let prob = KatoProblem {
            amplitude: grid.amplitude,
            b1,
            shift: grid.shift,
            p,
            g0: grid.g0,
            g0p: grid.g0p,
        };
        match integrate_kato_ode(&prob, &grid.controls) {
            Ok(run) => RegionCell { p, b1, outcome: run.outcome, error: None },
            Err(e) => RegionCell { p, b1, outcome: OdeOutcome::Failure, error: Some(e.to_string()) },
        }
    })
}
