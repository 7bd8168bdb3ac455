//! Radially symmetric method-of-lines integrator.
//!
//! The first-order system `u_t = v`, `v_t = e^{-2Ht} Δu + S(t, u, v)` is
//! discretized on nodes `r_i = i h`. The radial Laplacian
//! `r^{1-n} ∂_r(r^{n-1} ∂_r u)` is written in flux form
//!
//! ```text
//! (Δu)_i = (F_{i+1/2} - F_{i-1/2}) / V_i,   F_{i+1/2} = r_{i+1/2}^{n-1} (u_{i+1} - u_i) / h
//! ```
//!
//! with `V_i = (r_{i+1/2}^n - r_{i-1/2}^n)/n` the exact shell volume (per unit
//! solid angle). At the origin `V_0 = (h/2)^n/n`, which makes the first row
//! `2n(u_1 - u_0)/h²`, i.e. `n·u_rr` with the even ghost value `u_{-1} = u_1`.
//! The operator is symmetric in the `V`-weighted inner product, so the
//! discrete energy is conserved by the semi-discrete linear flow and
//! `Σ V_i (Δu)_i` telescopes to the (vanishing) outer flux.
//!
//! Time integration is classical RK4 with `dt = 0.5 h`, shortened only once
//! the nonlinear time scale becomes smaller than the CFL step near blow-up.
//! The outer node carries a homogeneous Dirichlet condition.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, FunctionalSample, FunctionalSeries, Pairing};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Nonlinearity};
use crate::special::sphere_area;

/// Courant number for the fixed time step.
pub const CFL: f64 = 0.5;
/// Default blow-up threshold on `sup|u|`.
pub const DEFAULT_U_MAX: f64 = 1e8;
/// Smallest admissible node count.
pub const MIN_NODES: usize = 128;
/// Smoothness order of the default bump `(1 - r²)₊^k`. The grid smears the
/// order-`k` kink at `r = 1` into an `O(h^k)` precursor ahead of the front;
/// `k = 8` keeps it below `1e-12` at the grid sizes used here.
pub const DEFAULT_BUMP_ORDER: u32 = 8;
/// Number of trailing steps used to extrapolate the blow-up time.
const EXTRAPOLATION_WINDOW: usize = 10;
/// Step length as a fraction of the nonlinear time scale.
const NONLINEAR_STEP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_max: f64,
    pub m: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, m: usize) -> Result<Self> {
        let grid = RadialGrid { r_max, m };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid whose outer radius is `1 + t_max + 10h`, so that compactly
    /// supported data never reach the boundary before `t_max`.
    pub fn for_horizon(t_max: f64, m: usize) -> Result<Self> {
        Self::with_front(1.0 + t_max, m)
    }

    /// Grid whose outer radius is `light_cone_radius(t_max, hubble) + 10h`.
    /// For `H > 0` this stays below `1 + 1/H` however long the run.
    pub fn for_light_cone(t_max: f64, hubble: f64, m: usize) -> Result<Self> {
        Self::with_front(light_cone_radius(t_max, hubble), m)
    }

    fn with_front(front: f64, m: usize) -> Result<Self> {
        if m <= 11 {
            return Err(Error::validation(format!("node count {m} too small")));
        }
        let r_max = front * (m as f64 - 1.0) / (m as f64 - 11.0);
        RadialGrid::new(r_max, m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < MIN_NODES {
            return Err(Error::validation(format!(
                "node count {} below minimum {MIN_NODES}",
                self.m
            )));
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return Err(Error::validation(format!("r_max = {} must be > 0", self.r_max)));
        }
        Ok(())
    }

    /// Checks that the support of unit-ball data stays inside the grid up to
    /// `t_max` at Hubble constant `hubble`.
    pub fn validate_horizon(&self, t_max: f64, hubble: f64) -> Result<()> {
        let front = light_cone_radius(t_max, hubble);
        if self.r_max < front {
            return Err(Error::validation(format!(
                "r_max = {} smaller than the light-cone radius {front} at T_max = {t_max}",
                self.r_max
            )));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.r_max / (self.m as f64 - 1.0)
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.r(i)).collect()
    }

    /// The fixed CFL time step.
    pub fn dt(&self) -> f64 {
        CFL * self.h()
    }
}

/// Radius reached by a front leaving `r = 1` at speed `e^{-Hs}`:
/// `1 + (1 - e^{-Ht})/H`, and `1 + t` for `H = 0`.
pub fn light_cone_radius(t: f64, hubble: f64) -> f64 {
    if hubble == 0.0 {
        1.0 + t
    } else {
        1.0 - (-hubble * t).exp_m1() / hubble
    }
}

/// `ε f` and `ε g` with bump profiles `(1 - r²)₊^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub epsilon: f64,
    pub k_f: u32,
    pub k_g: u32,
    pub f_on: bool,
    pub g_on: bool,
}

impl Default for InitialDataSpec {
    fn default() -> Self {
        InitialDataSpec { epsilon: 1.0, k_f: DEFAULT_BUMP_ORDER, k_g: DEFAULT_BUMP_ORDER, f_on: true, g_on: true }
    }
}

impl InitialDataSpec {
    pub fn with_epsilon(epsilon: f64) -> Self {
        InitialDataSpec { epsilon, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::validation(format!("epsilon = {} outside [0, 1]", self.epsilon)));
        }
        if self.k_f < 4 || self.k_g < 4 {
            return Err(Error::validation("bump smoothness orders must be >= 4"));
        }
        if !self.g_on {
            return Err(Error::validation("initial velocity g must not vanish identically"));
        }
        Ok(())
    }

    pub fn f(&self, r: f64) -> f64 {
        if self.f_on {
            bump(r, self.k_f)
        } else {
            0.0
        }
    }

    pub fn g(&self, r: f64) -> f64 {
        if self.g_on {
            bump(r, self.k_g)
        } else {
            0.0
        }
    }
}

fn bump(r: f64, k: u32) -> f64 {
    let s = 1.0 - r * r;
    if s > 0.0 {
        s.powi(k as i32)
    } else {
        0.0
    }
}

/// Snapshot of `(u, u_t)` at the grid nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl WaveState {
    pub fn zeros(m: usize) -> Self {
        WaveState { t: 0.0, u: vec![0.0; m], v: vec![0.0; m] }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    pub fn sup_u(&self) -> f64 {
        sup_abs(&self.u)
    }

    pub fn sup_v(&self) -> f64 {
        sup_abs(&self.v)
    }
}

fn sup_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |acc, &y| acc.max(y.abs()))
}

pub fn make_initial_state(spec: &InitialDataSpec, grid: &RadialGrid) -> Result<WaveState> {
    spec.validate()?;
    grid.validate()?;
    let mut state = WaveState::zeros(grid.m);
    for i in 0..grid.m - 1 {
        let r = grid.r(i);
        state.u[i] = spec.epsilon * spec.f(r);
        state.v[i] = spec.epsilon * spec.g(r);
    }
    Ok(state)
}

/// Flux-form radial Laplacian and the matching quadrature weights.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    pub grid: RadialGrid,
    pub n: u32,
    /// Shell volumes `V_i` per unit solid angle.
    pub volumes: Vec<f64>,
    /// Face factors `r_{i+1/2}^{n-1}`, one per interval.
    pub faces: Vec<f64>,
    /// `|S^{n-1}|`.
    pub area: f64,
}

impl RadialOperator {
    pub fn new(grid: RadialGrid, n: u32) -> Result<Self> {
        grid.validate()?;
        if n < 2 {
            return Err(Error::validation(format!("dimension n = {n} must be >= 2")));
        }
        let h = grid.h();
        let m = grid.m;
        let nf = f64::from(n);
        let nm1 = n as i32 - 1;
        let faces: Vec<f64> = (0..m - 1).map(|i| ((i as f64 + 0.5) * h).powi(nm1)).collect();
        let volumes: Vec<f64> = (0..m)
            .map(|i| {
                let outer = ((i as f64 + 0.5) * h).min(grid.r_max);
                let inner = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
                (outer.powi(n as i32) - inner.powi(n as i32)) / nf
            })
            .collect();
        Ok(RadialOperator { grid, n, volumes, faces, area: sphere_area(n - 1) })
    }

    pub fn m(&self) -> usize {
        self.grid.m
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    /// Writes `Δu` into `out`; the Dirichlet node gets zero.
    pub fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        let m = self.m();
        let h = self.h();
        let mut flux_in = 0.0;
        for i in 0..m - 1 {
            let flux_out = self.faces[i] * (u[i + 1] - u[i]) / h;
            out[i] = (flux_out - flux_in) / self.volumes[i];
            flux_in = flux_out;
        }
        out[m - 1] = 0.0;
    }

    /// Centered radial derivative; zero at the origin by symmetry.
    pub fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let m = self.m();
        let h = self.h();
        out[0] = 0.0;
        for i in 1..m - 1 {
            out[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
        }
        out[m - 1] = (u[m - 1] - u[m - 2]) / h;
    }

    /// `|S^{n-1}| Σ V_i f_i`, the quadrature of `∫ f dx`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.area * self.volumes.iter().zip(f).map(|(w, x)| w * x).sum::<f64>()
    }

    /// `|S^{n-1}| Σ V_i f_i g_i`.
    pub fn integrate_product(&self, f: &[f64], g: &[f64]) -> f64 {
        self.area * self.volumes.iter().zip(f).zip(g).map(|((w, x), y)| w * x * y).sum::<f64>()
    }

    /// `½|S^{n-1}| [Σ V_i v_i² + c Σ r_{i+1/2}^{n-1} (u_{i+1}-u_i)²/h]`.
    ///
    /// With `c = 1` this is the energy conserved by the linear flat-space
    /// flow; `c = e^{-2Ht}` gives the dissipated energy of the expanding case.
    pub fn energy(&self, state: &WaveState, gradient_weight: f64) -> f64 {
        let h = self.h();
        let kinetic: f64 = self.volumes.iter().zip(&state.v).map(|(w, v)| w * v * v).sum();
        let potential: f64 = self
            .faces
            .iter()
            .zip(state.u.windows(2))
            .map(|(f, w)| f * (w[1] - w[0]) * (w[1] - w[0]) / h)
            .sum();
        0.5 * self.area * (kinetic + gradient_weight * potential)
    }
}

/// Time derivative of a [`WaveState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
}

/// Semi-discrete right-hand side evaluator with RK4 stepping.
#[derive(Debug, Clone)]
pub struct Solver {
    pub params: ModelParams,
    pub op: RadialOperator,
    scratch: Scratch,
}

#[derive(Debug, Clone)]
struct Scratch {
    lap: Vec<f64>,
    grad: Vec<f64>,
    ku: [Vec<f64>; 4],
    kv: [Vec<f64>; 4],
    stage_u: Vec<f64>,
    stage_v: Vec<f64>,
}

impl Scratch {
    fn new(m: usize) -> Self {
        let z = || vec![0.0; m];
        Scratch {
            lap: z(),
            grad: z(),
            ku: [z(), z(), z(), z()],
            kv: [z(), z(), z(), z()],
            stage_u: z(),
            stage_v: z(),
        }
    }
}

impl Solver {
    pub fn new(params: ModelParams, grid: RadialGrid) -> Result<Self> {
        params.validate()?;
        let op = RadialOperator::new(grid, params.n)?;
        let scratch = Scratch::new(grid.m);
        Ok(Solver { params, op, scratch })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.op.grid
    }

    /// Coefficient `e^{-2Ht}` of the Laplacian.
    pub fn wave_speed_squared(&self, t: f64) -> f64 {
        (-2.0 * self.params.hubble * t).exp()
    }

    /// Coefficient `e^{-n(p-1)Ht/2}` of the source.
    pub fn source_weight(&self, t: f64) -> f64 {
        (-self.params.source_decay() * t).exp()
    }

    /// Evaluates `(du/dt, dv/dt)` for the given fields at time `t`.
    fn eval(&mut self, t: f64, u: &[f64], v: &[f64], stage: usize) {
        let m = self.op.m();
        let c2 = self.wave_speed_squared(t);
        let w = self.source_weight(t);
        let p = self.params.p;
        self.op.laplacian(u, &mut self.scratch.lap);
        let kind = self.params.kind;
        if kind == Nonlinearity::PowerGrad {
            self.op.gradient(u, &mut self.scratch.grad);
        }
        let du = &mut self.scratch.ku[stage];
        let dv = &mut self.scratch.kv[stage];
        for i in 0..m - 1 {
            du[i] = v[i];
            let source = match kind {
                Nonlinearity::PowerU => w * u[i].abs().powf(p),
                Nonlinearity::PowerGrad => {
                    w * (v[i].abs().powf(p) + self.scratch.grad[i].abs().powf(p))
                }
                Nonlinearity::Linear => 0.0,
            };
            dv[i] = c2 * self.scratch.lap[i] + source;
        }
        du[m - 1] = 0.0;
        dv[m - 1] = 0.0;
    }

    /// Right-hand side of the semi-discrete system.
    pub fn rhs(&mut self, state: &WaveState) -> Result<Derivative> {
        self.check_shape(state)?;
        if !state.is_finite() {
            return Err(Error::Numerical(format!("non-finite state at t = {}", state.t)));
        }
        self.eval(state.t, &state.u, &state.v, 0);
        Ok(Derivative { du: self.scratch.ku[0].clone(), dv: self.scratch.kv[0].clone() })
    }

    fn check_shape(&self, state: &WaveState) -> Result<()> {
        let m = self.op.m();
        if state.u.len() != m || state.v.len() != m {
            return Err(Error::validation(format!(
                "state length ({}, {}) does not match grid size {m}",
                state.u.len(),
                state.v.len()
            )));
        }
        Ok(())
    }

    /// One classical RK4 step, in place. `dt` may be negative.
    pub fn step_in_place(&mut self, state: &mut WaveState, dt: f64) -> Result<()> {
        self.check_shape(state)?;
        let limit = CFL * self.op.h();
        if !(dt.abs() <= limit * (1.0 + 1e-12)) {
            return Err(Error::validation(format!(
                "time step {dt} violates the CFL limit {limit}"
            )));
        }
        let m = self.op.m();
        let t = state.t;
        let mut su = std::mem::take(&mut self.scratch.stage_u);
        let mut sv = std::mem::take(&mut self.scratch.stage_v);
        self.eval(t, &state.u, &state.v, 0);
        for (stage, (frac, src)) in [(0.5, 0), (0.5, 1), (1.0, 2)].into_iter().enumerate() {
            for i in 0..m {
                su[i] = state.u[i] + frac * dt * self.scratch.ku[src][i];
                sv[i] = state.v[i] + frac * dt * self.scratch.kv[src][i];
            }
            self.eval(t + frac * dt, &su, &sv, stage + 1);
        }
        self.scratch.stage_u = su;
        self.scratch.stage_v = sv;
        let k = &self.scratch;
        let sixth = dt / 6.0;
        for i in 0..m {
            state.u[i] += sixth * (k.ku[0][i] + 2.0 * k.ku[1][i] + 2.0 * k.ku[2][i] + k.ku[3][i]);
            state.v[i] += sixth * (k.kv[0][i] + 2.0 * k.kv[1][i] + 2.0 * k.kv[2][i] + k.kv[3][i]);
        }
        state.t = t + dt;
        if !state.is_finite() {
            return Err(Error::Numerical(format!("non-finite values at t = {}", state.t)));
        }
        Ok(())
    }

    /// One RK4 step returning the new state.
    pub fn step(&mut self, state: &WaveState, dt: f64) -> Result<WaveState> {
        let mut next = state.clone();
        self.step_in_place(&mut next, dt)?;
        Ok(next)
    }

    /// `∫ dv/dt dx` at the given state, i.e. the exact semi-discrete `G''`.
    pub fn second_derivative_of_mass(&mut self, state: &WaveState) -> Result<f64> {
        let d = self.rhs(state)?;
        Ok(self.op.integrate(&d.dv))
    }

    /// Local nonlinear time scale; `∞` when the source is absent or negligible.
    fn nonlinear_time_scale(&self, state: &WaveState) -> f64 {
        let p = self.params.p;
        let w = self.source_weight(state.t);
        match self.params.kind {
            Nonlinearity::Linear => f64::INFINITY,
            Nonlinearity::PowerU => (w * state.sup_u().powf(p - 1.0)).sqrt().recip(),
            Nonlinearity::PowerGrad => {
                let field = (w * state.sup_u().powf(p - 1.0)).sqrt().recip();
                let vel = (w * state.sup_v().powf(p - 1.0)).recip();
                field.min(vel)
            }
        }
    }

    /// Monitored amplitude and the quantity that vanishes linearly at blow-up.
    fn blowup_monitor(&self, state: &WaveState) -> (f64, f64) {
        let p = self.params.p;
        match self.params.kind {
            Nonlinearity::PowerGrad => {
                let a = state.sup_v().max(state.sup_u());
                (a, state.sup_v().powf(-(p - 1.0)))
            }
            _ => {
                let a = state.sup_u();
                (a, a.powf(-(p - 1.0) / 2.0))
            }
        }
    }

    /// Integrates from `state` until blow-up, `t_max`, or numerical failure.
    pub fn evolve(&mut self, mut state: WaveState, controls: &RunControls) -> Result<BlowupReport> {
        controls.validate()?;
        self.check_shape(&state)?;
        let initial_sup = self.blowup_monitor(&state).0;
        if controls.u_max <= initial_sup {
            return Err(Error::validation(format!(
                "U_max = {} does not exceed the initial amplitude {initial_sup}",
                controls.u_max
            )));
        }
        let pairing = if self.params.kind == Nonlinearity::PowerU && self.params.hubble > 0.0 {
            Some(Pairing::new(&self.op, &self.params)?)
        } else {
            None
        };
        let base_dt = self.op.grid.dt();
        let h = self.op.h();
        let mut series = FunctionalSeries::new(controls.sample_dt);
        let mut tail: Vec<(f64, f64)> = Vec::with_capacity(EXTRAPOLATION_WINDOW + 1);
        let mut peak = initial_sup;
        let mut support_leak = 0.0f64;
        let mut steps = 0usize;
        let mut next_sample = 0.0;

        let status = loop {
            if !state.is_finite() {
                break BlowupStatus::NumericalFailure;
            }
            let (amp, monitor) = self.blowup_monitor(&state);
            peak = peak.max(amp);
            support_leak = support_leak.max(self.support_leak(&state, h));
            if amp > controls.u_max {
                tail.push((state.t, monitor));
                break BlowupStatus::BlewUp;
            }
            if state.t >= next_sample - 1e-12 * controls.sample_dt {
                series.push(self.sample(&state, pairing.as_ref())?);
                next_sample += controls.sample_dt;
                while next_sample <= state.t {
                    next_sample += controls.sample_dt;
                }
            }
            if state.t >= controls.t_max - 1e-9 * base_dt {
                break BlowupStatus::SurvivedToTmax;
            }
            tail.push((state.t, monitor));
            if tail.len() > EXTRAPOLATION_WINDOW {
                tail.remove(0);
            }
            let mut dt = base_dt.min(NONLINEAR_STEP_FRACTION * self.nonlinear_time_scale(&state));
            dt = dt.min(controls.t_max - state.t);
            if dt < 1e-15 * (1.0 + state.t) {
                break BlowupStatus::NumericalFailure;
            }
            match self.step_in_place(&mut state, dt) {
                Ok(()) => steps += 1,
                Err(Error::Numerical(_)) => break BlowupStatus::NumericalFailure,
                Err(e) => return Err(e),
            }
        };

        if tail.len() > EXTRAPOLATION_WINDOW {
            tail.remove(0);
        }
        if state.is_finite() && series.last_time().is_none_or(|t| state.t > t) {
            series.push(self.sample(&state, pairing.as_ref())?);
        }
        let t_est = match status {
            BlowupStatus::BlewUp => Some(extrapolate_zero(&tail).unwrap_or(state.t).max(state.t)),
            _ => None,
        };
        Ok(BlowupReport {
            status,
            t_est,
            t_end: state.t,
            peak_sup: peak,
            support_leak,
            steps,
            m: self.op.m(),
            dt: base_dt,
            series,
            final_state: state,
        })
    }

    fn support_leak(&self, state: &WaveState, h: f64) -> f64 {
        let front = 1.0 + state.t + 3.0 * h;
        let first = (front / h).floor() as usize + 1;
        state.u.iter().skip(first).fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    fn sample(&mut self, state: &WaveState, pairing: Option<&Pairing>) -> Result<FunctionalSample> {
        let gpp = self.second_derivative_of_mass(state)?;
        let t = state.t;
        let p = self.params.p;
        let g = diagnostics::functional_g(state, &self.op);
        let gp = self.op.integrate(&state.v);
        let g1 = pairing.map(|pr| pr.functional_g1(state, &self.op));
        Ok(FunctionalSample {
            t,
            sup_u: state.sup_u(),
            sup_v: state.sup_v(),
            g,
            gp,
            gpp,
            g1,
            energy: self.op.energy(state, self.wave_speed_squared(t)),
            lp_u: diagnostics::lp_norm(&state.u, &self.op, p),
            lp_v: diagnostics::lp_norm(&state.v, &self.op, p),
        })
    }
}

/// Least-squares line through `(t, w)` and its zero crossing.
fn extrapolate_zero(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (st, sw) = points.iter().fold((0.0, 0.0), |(a, b), &(t, w)| (a + t, b + w));
    let (mt, mw) = (st / n, sw / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, w) in points {
        sxy += (t - mt) * (w - mw);
        sxx += (t - mt) * (t - mt);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    Some(mt - mw / slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunControls {
    pub t_max: f64,
    pub u_max: f64,
    pub sample_dt: f64,
}

impl RunControls {
    pub fn new(t_max: f64) -> Self {
        RunControls { t_max, u_max: DEFAULT_U_MAX, sample_dt: 0.01 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::validation(format!("T_max = {} must be > 0", self.t_max)));
        }
        if !(self.sample_dt > 0.0) {
            return Err(Error::validation(format!("sample_dt = {} must be > 0", self.sample_dt)));
        }
        if !(self.u_max > 0.0) {
            return Err(Error::validation(format!("U_max = {} must be > 0", self.u_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlowupStatus {
    BlewUp,
    SurvivedToTmax,
    NumericalFailure,
}

impl BlowupStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BlowupStatus::BlewUp => "BlewUp",
            BlowupStatus::SurvivedToTmax => "SurvivedToTmax",
            BlowupStatus::NumericalFailure => "NumericalFailure",
        }
    }
}

impl std::fmt::Display for BlowupStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BlowupStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "BlewUp" => Ok(BlowupStatus::BlewUp),
            "SurvivedToTmax" => Ok(BlowupStatus::SurvivedToTmax),
            "NumericalFailure" => Ok(BlowupStatus::NumericalFailure),
            other => Err(Error::validation(format!("unknown status `{other}`"))),
        }
    }
}

/// Outcome of one evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub status: BlowupStatus,
    /// Extrapolated lifespan; present only for [`BlowupStatus::BlewUp`].
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    /// Time reached by the integration.
    pub t_end: f64,
    pub peak_sup: f64,
    /// Largest `|u|` seen outside `r ≤ 1 + t + 3h`.
    pub support_leak: f64,
    pub steps: usize,
    pub m: usize,
    /// Base (CFL) time step.
    pub dt: f64,
    pub series: FunctionalSeries,
    #[serde(skip)]
    pub final_state: WaveState,
}

/// Integrates the data `spec` on `grid`.
pub fn evolve_until_blowup(
    params: &ModelParams,
    spec: &InitialDataSpec,
    grid: &RadialGrid,
    controls: &RunControls,
) -> Result<BlowupReport> {
    grid.validate_horizon(controls.t_max, params.hubble)?;
    let state = make_initial_state(spec, grid)?;
    let mut solver = Solver::new(*params, *grid)?;
    solver.evolve(state, controls)
}

/// Lifespan from a sequence of blow-up reports on successively refined grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanEstimate {
    pub t_est: f64,
    /// `|T_finest - T_previous|`.
    pub error: f64,
}

pub fn lifespan_estimate(reports: &[BlowupReport]) -> Result<LifespanEstimate> {
    let times: Vec<Option<f64>> = reports.iter().map(|r| r.t_est).collect();
    lifespan_from_times(&times)
}

/// Same as [`lifespan_estimate`] on bare `T_est` values (`None` = no blow-up).
pub fn lifespan_from_times(times: &[Option<f64>]) -> Result<LifespanEstimate> {
    if times.len() < 2 {
        return Err(Error::validation("need at least two refinement levels"));
    }
    let values: Vec<f64> = times
        .iter()
        .map(|t| t.ok_or_else(|| Error::validation("blow-up is not grid-converged: mixed statuses")))
        .collect::<Result<_>>()?;
    let last = values[values.len() - 1];
    let prev = values[values.len() - 2];
    Ok(LifespanEstimate { t_est: last, error: (last - prev).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn linear(n: u32, h: f64) -> ModelParams {
        ModelParams { n, hubble: h, p: 2.0, kind: Nonlinearity::Linear }
    }

    #[test]
    fn grid_horizon_spacing() {
        let g = RadialGrid::for_horizon(3.0, 1024).unwrap();
        assert!((g.r_max - (4.0 + 10.0 * g.h())).abs() < 1e-12);
        assert!(g.validate_horizon(3.0, 0.0).is_ok());
        assert!(RadialGrid::new(1.0, 64).is_err());
        assert!(RadialGrid::new(2.0, 256).unwrap().validate_horizon(3.0, 0.0).is_err());
        // Front at 1 + (1 - e^{-3})/1 < 2.
        assert!(RadialGrid::new(2.0, 256).unwrap().validate_horizon(3.0, 1.0).is_ok());
        let lc = RadialGrid::for_light_cone(1e3, 0.1, 1024).unwrap();
        assert!(lc.r_max < 11.2 && lc.validate_horizon(1e3, 0.1).is_ok());
        assert!((light_cone_radius(2.0, 1e-9) - 3.0).abs() < 1e-8);
    }

    #[test]
    fn volumes_sum_to_ball() {
        for n in 2..=5 {
            let op = RadialOperator::new(RadialGrid::new(2.0, 300).unwrap(), n).unwrap();
            let total: f64 = op.volumes.iter().sum::<f64>() * op.area;
            let want = crate::special::ball_volume(n) * 2f64.powi(n as i32);
            assert!((total - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn origin_row_is_regularized_laplacian() {
        let op = RadialOperator::new(RadialGrid::new(1.0, 200).unwrap(), 3).unwrap();
        let h = op.h();
        let u: Vec<f64> = op.grid.nodes().iter().map(|r| 1.0 - r * r).collect();
        let mut out = vec![0.0; u.len()];
        op.laplacian(&u, &mut out);
        assert!((out[0] - 3.0 * 2.0 * (u[1] - u[0]) / (h * h)).abs() < 1e-9);
        // Even quadratics are reproduced exactly: Δ(1 - r²) = -2n.
        for &x in &out[..150] {
            assert!((x + 6.0).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn initial_state_examples() {
        let grid = RadialGrid::new(3.0, 301).unwrap();
        let s = make_initial_state(&InitialDataSpec::with_epsilon(0.0), &grid).unwrap();
        assert!(s.u.iter().chain(&s.v).all(|&x| x == 0.0));
        let s = make_initial_state(&InitialDataSpec::default(), &grid).unwrap();
        assert_eq!((s.u[0], s.v[0]), (1.0, 1.0));
        assert!(s.u.iter().enumerate().all(|(i, &x)| grid.r(i) < 1.0 || x == 0.0));

        let bad = InitialDataSpec { g_on: false, ..Default::default() };
        assert!(make_initial_state(&bad, &grid).is_err());
        let rough = InitialDataSpec { k_f: 2, ..Default::default() };
        assert!(make_initial_state(&rough, &grid).is_err());
    }

    #[test]
    fn initial_mass_matches_riemann_sum() {
        let grid = RadialGrid::new(2.0, 20001).unwrap();
        let op = RadialOperator::new(grid, 3).unwrap();
        let spec = InitialDataSpec { epsilon: 0.7, k_f: 4, k_g: 4, ..Default::default() };
        let s = make_initial_state(&spec, &grid).unwrap();
        let g0 = op.integrate(&s.u);
        let k = 2_000_000;
        let dr = 1.0 / k as f64;
        let brute: f64 = (0..k)
            .map(|i| {
                let r = (i as f64 + 0.5) * dr;
                0.7 * (1.0 - r * r).powi(4) * r * r
            })
            .sum::<f64>()
            * dr
            * 4.0
            * PI;
        assert!((g0 - brute).abs() < 1e-8, "{g0} vs {brute}");
    }

    #[test]
    fn constant_field_source() {
        let params = ModelParams { n: 3, hubble: 0.3, p: 2.5, kind: Nonlinearity::PowerU };
        let grid = RadialGrid::new(4.0, 200).unwrap();
        let mut solver = Solver::new(params, grid).unwrap();
        let c = 1.7f64;
        let mut s = WaveState::zeros(200);
        s.u.iter_mut().for_each(|x| *x = c);
        let d = solver.rhs(&s).unwrap();
        for &x in &d.dv[..198] {
            assert!((x - c.powf(2.5)).abs() < 1e-12);
        }
        assert_eq!(d.du, s.v);
    }

    #[test]
    fn large_hubble_decouples_space() {
        let params = ModelParams { n: 3, hubble: 1e3, p: 2.0, kind: Nonlinearity::PowerU };
        let grid = RadialGrid::new(3.0, 301).unwrap();
        let mut solver = Solver::new(params, grid).unwrap();
        let mut s = make_initial_state(&InitialDataSpec::default(), &grid).unwrap();
        s.t = 1.0;
        let d = solver.rhs(&s).unwrap();
        assert!(d.dv.iter().all(|x| x.abs() < 1e-300));
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let grid = RadialGrid::new(3.0, 200).unwrap();
        let mut solver = Solver::new(linear(3, 0.0), grid).unwrap();
        let mut s = WaveState::zeros(200);
        s.u[5] = f64::NAN;
        assert!(matches!(solver.rhs(&s), Err(Error::Numerical(_))));
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let grid = RadialGrid::new(3.0, 200).unwrap();
        let mut solver = Solver::new(linear(3, 0.0), grid).unwrap();
        let s = WaveState::zeros(200);
        assert!(solver.step(&s, grid.dt() * 1.01).is_err());
        let z = solver.step(&s, grid.dt()).unwrap();
        assert!(z.u.iter().chain(&z.v).all(|&x| x == 0.0));
    }

    #[test]
    fn forward_backward_returns_to_start() {
        let grid = RadialGrid::new(3.0, 401).unwrap();
        let mut solver = Solver::new(linear(3, 0.0), grid).unwrap();
        let s0 = make_initial_state(&InitialDataSpec::default(), &grid).unwrap();
        let gap = |dt: f64, solver: &mut Solver| {
            let fwd = solver.step(&s0, dt).unwrap();
            let back = solver.step(&fwd, -dt).unwrap();
            s0.u.iter().zip(&back.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let e1 = gap(grid.dt(), &mut solver);
        let e2 = gap(grid.dt() / 2.0, &mut solver);
        assert!(e1 < 1e-6, "{e1}");
        // Leading error of the round trip is O(dt⁵) or better.
        assert!(e1 / e2 > 16.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn lifespan_estimate_examples() {
        let e = lifespan_from_times(&[Some(1.10), Some(1.05), Some(1.04)]).unwrap();
        assert_eq!(e.t_est, 1.04);
        assert!((e.error - 0.01).abs() < 1e-12);
        let e = lifespan_from_times(&[Some(2.0), Some(2.0)]).unwrap();
        assert_eq!((e.t_est, e.error), (2.0, 0.0));
        assert!(lifespan_from_times(&[Some(2.0), None]).is_err());
        assert!(lifespan_from_times(&[Some(2.0)]).is_err());
    }

    #[test]
    fn extrapolation_of_exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.1, 2.0 - 0.5 * i as f64 * 0.1)).collect();
        assert!((extrapolate_zero(&pts).unwrap() - 4.0).abs() < 1e-12);
        assert!(extrapolate_zero(&[(0.0, 1.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn zero_data_survives() {
        let params = ModelParams { n: 3, hubble: 0.1, p: 2.0, kind: Nonlinearity::PowerU };
        let grid = RadialGrid::for_horizon(1.0, 256).unwrap();
        let r = evolve_until_blowup(
            &params,
            &InitialDataSpec::with_epsilon(0.0),
            &grid,
            &RunControls::new(1.0),
        )
        .unwrap();
        assert_eq!(r.status, BlowupStatus::SurvivedToTmax);
        assert!(r.final_state.u.iter().all(|&x| x == 0.0));
        assert!(r.t_est.is_none());
    }

    #[test]
    fn threshold_below_initial_amplitude_is_rejected() {
        let params = ModelParams { n: 3, hubble: 0.1, p: 2.0, kind: Nonlinearity::PowerU };
        let grid = RadialGrid::for_horizon(1.0, 256).unwrap();
        let controls = RunControls { u_max: 0.5, ..RunControls::new(1.0) };
        assert!(evolve_until_blowup(&params, &InitialDataSpec::default(), &grid, &controls).is_err());
    }
}
