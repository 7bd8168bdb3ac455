use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dslab_core::harness::{
    fit_power_law, lifespan_points, run_sweep, worker_count, write_json, write_outputs, write_region_map_csv,
    write_series_csv, FitReport, OdeLabConfig, RegionMapConfig, SimulateConfig, SweepConfig,
};
use dslab_core::model::{
    glassey_exponent, kato_condition, lifespan_exponent_glassey, lifespan_exponent_strauss, strauss_exponent,
};
use dslab_core::odelab::{blowup_region_map, integrate_kato_ode, lemma22_feasible, rescale_problem};
use dslab_core::solver::evolve_until_blowup;
use dslab_core::special::half_offset_grid;
use dslab_core::{Error, ModelParams, Nonlinearity, TestFunctionContext};

#[derive(Parser)]
#[command(name = "dslab", version, about = "Blow-up laboratory for semilinear waves on de Sitter spacetime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical and lifespan exponents for dimension `n` and power `p`.
    Exponents {
        n: u32,
        p: f64,
        /// Hubble constant used for the Kato verdicts.
        #[arg(long, default_value_t = 0.1)]
        hubble: f64,
    },
    /// Accuracy checks on the test function φ₁.
    TestfnCheck {
        #[arg(long, default_value_t = 3)]
        n: u32,
        /// Angular quadrature order.
        #[arg(long, default_value_t = 64)]
        order: usize,
        #[arg(long, default_value_t = 50.0)]
        r_max: f64,
        /// Also tabulate the ψ₁ integral for this power.
        #[arg(long)]
        p: Option<f64>,
    },
    /// One evolution.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Amplitude sweep with power-law fit.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Criterion ODE, rescaling and feasibility queries.
    OdeLab {
        #[arg(long)]
        config: PathBuf,
    },
    /// Blow-up/survival map over a (p, b1) grid.
    RegionMap {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }

    fn runtime(e: Error) -> Self {
        Failure { code: if e.is_user_error() { 1 } else { 2 }, message: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Exponents { n, p, hubble } => exponents(n, p, hubble),
        Command::TestfnCheck { n, order, r_max, p } => testfn_check(n, order, r_max, p),
        Command::Simulate { config } => simulate(&config),
        Command::Sweep { config } => sweep(&config),
        Command::OdeLab { config } => ode_lab(&config),
        Command::RegionMap { config } => region_map(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn or_na(v: dslab_core::Result<f64>) -> String {
    v.map_or_else(|e| format!("n/a ({e})"), |x| format!("{x:.12}"))
}

fn exponents(n: u32, p: f64, hubble: f64) -> Outcome {
    let pc = strauss_exponent(n).map_err(Failure::usage)?;
    let pg = glassey_exponent(n).map_err(Failure::usage)?;
    println!("n = {n}, p = {p}");
    println!("strauss exponent p_c   = {pc:.12}");
    println!("glassey exponent p'_c  = {pg:.12}");
    println!("strauss lifespan gamma = {}", or_na(lifespan_exponent_strauss(n, p)));
    println!("glassey lifespan gamma = {}", or_na(lifespan_exponent_glassey(p)));
    for kind in [Nonlinearity::PowerU, Nonlinearity::PowerGrad] {
        let params = ModelParams::new(n, hubble, p, kind).map_err(Failure::usage)?;
        if let Some(d) = params.derived() {
            println!(
                "{:<9} a1 = {:.6}, b1 = {:.6}, kato condition {}",
                kind.as_str(),
                d.a1,
                d.b1,
                if kato_condition(d.a1, d.b1, p) { "holds" } else { "fails" }
            );
        }
    }
    Ok(())
}

fn testfn_check(n: u32, order: usize, r_max: f64, p: Option<f64>) -> Outcome {
    let ctx = TestFunctionContext::new(n, order).map_err(Failure::usage)?;
    let gap = ctx.order_doubling_gap(r_max, 200).map_err(Failure::runtime)?;
    println!("order {order} -> {}: max relative change {gap:.3e} on [0, {r_max}]", 2 * order);
    if n == 3 {
        let worst = (1..=1000)
            .map(|i| {
                let r = r_max * i as f64 / 1000.0;
                let exact = 4.0 * std::f64::consts::PI * r.sinh() / r;
                ctx.phi1(r).map(|v| ((v - exact) / exact).abs())
            })
            .try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)))
            .map_err(Failure::runtime)?;
        println!("closed form 4π sinh(r)/r: max relative error {worst:.3e}");
    }
    let coarse = ctx.verify_eigenfunction(&half_offset_grid(0.5, 10.0, 0.02)).map_err(Failure::runtime)?;
    let fine = ctx.verify_eigenfunction(&half_offset_grid(0.5, 10.0, 0.01)).map_err(Failure::runtime)?;
    println!(
        "eigen residual h=0.02: {:.3e}, h=0.01: {:.3e}, ratio {:.3}",
        coarse.max_residual,
        fine.max_residual,
        coarse.max_residual / fine.max_residual
    );
    if let Some(p) = p {
        let ctx = ctx.with_exponent(p);
        let nf = f64::from(n);
        let exponent = nf - 1.0 - (nf - 1.0) * p / (2.0 * (p - 1.0));
        println!("t, psi1 integral, ratio to (1+t)^{exponent:.4}");
        for t in [0.0, 1.0, 5.0, 10.0, 20.0, 50.0] {
            let v = ctx.lemma23_integral(t).map_err(Failure::runtime)?;
            println!("{t}, {v:.10e}, {:.10e}", v / (1.0 + t).powf(exponent));
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir)
        .map_err(|source| Failure::runtime(Error::Io { path: dir.to_path_buf(), source }))
}

fn simulate(path: &Path) -> Outcome {
    let cfg = SimulateConfig::load(path).map_err(Failure::usage)?;
    let grid = cfg.grid().map_err(Failure::usage)?;
    let report = evolve_until_blowup(&cfg.model, &cfg.data, &grid, &cfg.controls()).map_err(Failure::runtime)?;
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("config.json"), &cfg).map_err(Failure::runtime)?;
    write_json(&cfg.output_dir.join("report.json"), &report).map_err(Failure::runtime)?;
    write_series_csv(&cfg.output_dir.join("series.csv"), &report.series, &cfg.model).map_err(Failure::runtime)?;
    println!(
        "status {} T_est {} t_end {:.6} steps {} peak {:.3e} leak {:.2e}",
        report.status.as_str(),
        report.t_est.map_or("-".into(), |t| format!("{t:.8}")),
        report.t_end,
        report.steps,
        report.peak_sup,
        report.support_leak
    );
    Ok(())
}

fn sweep(path: &Path) -> Outcome {
    let cfg = SweepConfig::load(path).map_err(Failure::usage)?;
    for w in cfg.window_warnings() {
        eprintln!("warning: {w}");
    }
    let run = run_sweep(&cfg, worker_count()).map_err(Failure::runtime)?;
    for e in &run.errors {
        eprintln!("run error: {e}");
    }
    let points = lifespan_points(&run.records);
    let fit = match fit_power_law(&points) {
        Ok(f) => Some(FitReport::new(&f, &cfg)),
        Err(e) => {
            eprintln!("warning: no fit: {e}");
            None
        }
    };
    let written = write_outputs(&run, fit.as_ref(), &cfg.output_dir).map_err(Failure::runtime)?;
    for r in &run.records {
        println!(
            "eps {:<6} m {:<6} {:<16} T_est {}",
            r.epsilon,
            r.m,
            format!("{:?}", r.status),
            r.t_est.map_or("-".into(), |t| format!("{t:.6}"))
        );
    }
    if let Some(f) = &fit {
        println!(
            "fit slope {:.6} (theory -{}), r^2 {:.6}",
            f.slope,
            f.theoretical_exponent.map_or("n/a".into(), |g| format!("{g:.6}")),
            f.r_squared
        );
    }
    println!("wrote {} files to {}", written.len(), cfg.output_dir.display());
    Ok(())
}

fn ode_lab(path: &Path) -> Outcome {
    let cfg = OdeLabConfig::load(path).map_err(Failure::usage)?;
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("config.json"), &cfg).map_err(Failure::runtime)?;
    let run = integrate_kato_ode(&cfg.problem, &cfg.controls).map_err(Failure::runtime)?;
    write_json(&cfg.output_dir.join("ode_run.json"), &run).map_err(Failure::runtime)?;
    println!(
        "outcome {} T* {} steps {} rejected {}",
        run.outcome.label(),
        run.outcome.t_star().map_or("-".into(), |t| format!("{t:.10}")),
        run.steps,
        run.rejected
    );

    if let Some(r) = cfg.rescale {
        let rescaled = rescale_problem(r.epsilon, r.a1, &cfg.problem).map_err(Failure::usage)?;
        let rrun = integrate_kato_ode(&rescaled.problem, &cfg.controls).map_err(Failure::runtime)?;
        let predicted = run.outcome.t_star().map(|t| rescaled.tau_of(t));
        println!(
            "rescaled eps {} outcome {} tau* {} predicted {} comparison horizon {}",
            r.epsilon,
            rrun.outcome.label(),
            rrun.outcome.t_star().map_or("-".into(), |t| format!("{t:.10}")),
            predicted.map_or("-".into(), |t| format!("{t:.10}")),
            rescaled.comparison_horizon().map_or("unbounded".into(), |h| format!("{h:.6}"))
        );
        write_json(&cfg.output_dir.join("rescaled.json"), &(rescaled, rrun)).map_err(Failure::runtime)?;
    }

    if let Some(f) = cfg.feasibility {
        let res = lemma22_feasible(
            &f.setup.weights,
            &f.setup.hypothesis,
            cfg.problem.p,
            cfg.problem.amplitude,
            cfg.problem.shift,
            &f.search,
        )
        .map_err(Failure::runtime)?;
        println!(
            "feasibility t** {} required {:.6e} I(window) {:.6e} I(inf) <= {} decreasing weight {}",
            res.t_star.map_or("none".into(), |t| format!("{t:.6}")),
            res.required_integral,
            res.tail.integral_to_window,
            res.tail.upper().map_or("inf".into(), |u| format!("{u:.6e}")),
            res.combined_decreasing
        );
        write_json(&cfg.output_dir.join("feasibility.json"), &res).map_err(Failure::runtime)?;
    }
    Ok(())
}

fn region_map(path: &Path) -> Outcome {
    let cfg = RegionMapConfig::load(path).map_err(Failure::usage)?;
    let cells = blowup_region_map(&cfg.grid, worker_count());
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("config.json"), &cfg).map_err(Failure::runtime)?;
    let out = cfg.output_dir.join("region_map.csv");
    write_region_map_csv(&out, &cells).map_err(Failure::runtime)?;
    let blew = cells.iter().filter(|c| c.outcome.blew_up()).count();
    let errors = cells.iter().filter(|c| c.error.is_some()).count();
    println!("{} cells: {blew} blow up, {errors} errors; wrote {}", cells.len(), out.display());
    Ok(())
}
