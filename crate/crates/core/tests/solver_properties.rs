use dslab_core::diagnostics::convexity_check;
use dslab_core::odelab::{integrate_kato_ode, KatoProblem, OdeControls};
use dslab_core::solver::{
    evolve_until_blowup, make_initial_state, RadialGrid, RadialOperator, RunControls, Solver,
};
use dslab_core::{BlowupStatus, InitialDataSpec, ModelParams, Nonlinearity, WaveState};

fn linear(n: u32, hubble: f64) -> ModelParams {
    ModelParams::new(n, hubble, 2.0, Nonlinearity::Linear).unwrap()
}

#[test]
fn linear_energy_conserved_at_fine_resolution() {
    let params = linear(3, 0.0);
    let grid = RadialGrid::for_horizon(2.0, 4096).unwrap();
    let controls = RunControls { t_max: 2.0, u_max: 1e8, sample_dt: 0.05 };
    let report = evolve_until_blowup(&params, &InitialDataSpec::default(), &grid, &controls).unwrap();
    assert_eq!(report.status, BlowupStatus::SurvivedToTmax);
    let e0 = report.series.samples[0].energy;
    let drift = report
        .series
        .samples
        .iter()
        .map(|s| ((s.energy - e0) / e0).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-6, "relative energy drift {drift:e}");
}

/// `Δ(sin(kr)/r) = -k² sin(kr)/r` in three dimensions.
fn standing_mode_error(m: usize) -> f64 {
    let r_max = 1.0;
    let k = 2.0 * std::f64::consts::PI / r_max;
    let grid = RadialGrid::new(r_max, m).unwrap();
    let op = RadialOperator::new(grid, 3).unwrap();
    let u: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| if r == 0.0 { k } else { (k * r).sin() / r })
        .collect();
    let mut lap = vec![0.0; m];
    op.laplacian(&u, &mut lap);
    (0..m - 1).map(|i| (lap[i] + k * k * u[i]).abs()).fold(0.0, f64::max)
}

#[test]
fn standing_mode_second_order() {
    let errs: Vec<f64> = [128, 256, 512, 1024].iter().map(|&m| standing_mode_error(m)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "observed order {order} from {errs:?}");
    }
}

#[test]
fn support_stays_inside_light_cone() {
    for &(n, hubble, kind) in &[
        (3, 0.0, Nonlinearity::Linear),
        (3, 0.5, Nonlinearity::PowerU),
        (2, 0.2, Nonlinearity::PowerGrad),
    ] {
        let params = ModelParams::new(n, hubble, 2.0, kind).unwrap();
        let grid = RadialGrid::for_horizon(3.0, 2048).unwrap();
        let controls = RunControls { t_max: 3.0, u_max: 1e8, sample_dt: 0.1 };
        let spec = InitialDataSpec::with_epsilon(0.5);
        let report = evolve_until_blowup(&params, &spec, &grid, &controls).unwrap();
        assert!(report.support_leak < 1e-12, "n={n} H={hubble}: leak {:e}", report.support_leak);
    }
}

#[test]
fn expanding_background_dissipates_modified_energy() {
    let params = linear(3, 0.3);
    let grid = RadialGrid::for_horizon(4.0, 1024).unwrap();
    let controls = RunControls { t_max: 4.0, u_max: 1e8, sample_dt: 0.02 };
    let report = evolve_until_blowup(&params, &InitialDataSpec::default(), &grid, &controls).unwrap();
    let s = &report.series.samples;
    let e0 = s[0].energy;
    for w in s.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-6 * e0, "energy rose at t={}", w[1].t);
    }
    assert!(s.last().unwrap().energy < 0.9 * e0);
}

#[test]
fn power_u_mass_is_convex() {
    let params = ModelParams::new(3, 0.1, 2.0, Nonlinearity::PowerU).unwrap();
    let grid = RadialGrid::for_light_cone(10.0, 0.1, 1024).unwrap();
    let controls = RunControls { t_max: 10.0, u_max: 1e8, sample_dt: 0.02 };
    let report = evolve_until_blowup(&params, &InitialDataSpec::default(), &grid, &controls).unwrap();
    assert!(report.series.times_strictly_increasing());
    assert_eq!(convexity_check(&report.series).unwrap(), 0);
    for w in report.series.samples.windows(2) {
        assert!(w[1].gp >= w[0].gp);
    }
}

/// Homogeneous data on a clamped domain: until the boundary signal arrives,
/// the origin follows `u'' = e^{-n(p-1)Ht/2} u^p`.
fn homogeneous_blowup(hubble: f64) -> (f64, f64) {
    let params = ModelParams::new(3, hubble, 2.0, Nonlinearity::PowerU).unwrap();
    let grid = RadialGrid::new(6.0, 1024).unwrap();
    let state = WaveState { t: 0.0, u: vec![1.0; grid.m], v: vec![1.0; grid.m] };
    let mut solver = Solver::new(params, grid).unwrap();
    let report = solver.evolve(state, &RunControls::new(5.0)).unwrap();
    assert_eq!(report.status, BlowupStatus::BlewUp);
    let prob = KatoProblem { amplitude: 1.0, b1: params.source_decay(), shift: 0.0, p: 2.0, g0: 1.0, g0p: 1.0 };
    let ode = integrate_kato_ode(&prob, &OdeControls::default()).unwrap();
    (report.t_est.unwrap(), ode.outcome.t_star().unwrap())
}

#[test]
fn homogeneous_data_reduce_to_the_ode() {
    for &hubble in &[0.0, 0.1] {
        let (pde, ode) = homogeneous_blowup(hubble);
        assert!(((pde - ode) / ode).abs() < 0.01, "H={hubble}: pde {pde} ode {ode}");
    }
}

#[test]
fn initial_state_samples_the_profiles() {
    let grid = RadialGrid::new(2.0, 256).unwrap();
    let spec = InitialDataSpec { epsilon: 1.0, k_f: 4, k_g: 4, f_on: true, g_on: true };
    let s = make_initial_state(&spec, &grid).unwrap();
    assert_eq!((s.u[0], s.v[0]), (1.0, 1.0));
    assert!(s.u.iter().zip(grid.nodes()).all(|(u, r)| r < 1.0 || *u == 0.0));
}
