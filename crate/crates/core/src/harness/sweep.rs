use serde::{Deserialize, Serialize};

use crate::diagnostics::FunctionalSeries;
use crate::error::{Error, Result};
use crate::model::Nonlinearity;
use crate::solver::{evolve_until_blowup, lifespan_from_times, BlowupStatus, RadialGrid};

use super::config::SweepConfig;
use super::parallel_map;
use super::io::SCHEMA_VERSION;

/// Row status; `Error` marks a run that could not be carried out at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordStatus {
    BlewUp,
    SurvivedToTmax,
    NumericalFailure,
    Error,
}

impl From<BlowupStatus> for RecordStatus {
    fn from(s: BlowupStatus) -> Self {
        match s {
            BlowupStatus::BlewUp => RecordStatus::BlewUp,
            BlowupStatus::SurvivedToTmax => RecordStatus::SurvivedToTmax,
            BlowupStatus::NumericalFailure => RecordStatus::NumericalFailure,
        }
    }
}

/// One `(ε, m)` cell of a sweep; carries enough to rerun it alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub schema_version: u32,
    pub n: u32,
    #[serde(rename = "H")]
    pub hubble: f64,
    pub p: f64,
    pub kind: Nonlinearity,
    pub epsilon: f64,
    pub m: usize,
    pub dt: f64,
    pub status: RecordStatus,
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    /// Change of `T_est` between the two finest levels; set on the finest row.
    #[serde(rename = "T_err")]
    pub t_err: Option<f64>,
    pub peak_sup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub config: SweepConfig,
    /// Row-major in `(ε, refinement)`.
    pub records: Vec<SweepRecord>,
    /// Functional series of the finest level, one per ε.
    pub series: Vec<(f64, FunctionalSeries)>,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    /// Largest `|u|` seen ahead of the light cone over all runs.
    pub max_support_leak: f64,
}

struct Cell {
    record: SweepRecord,
    series: Option<FunctionalSeries>,
    error: Option<String>,
    leak: f64,
}

pub fn run_sweep(cfg: &SweepConfig, workers: usize) -> Result<SweepRun> {
    cfg.validate()?;
    let levels = cfg.refinements.len();
    let count = cfg.epsilons.len() * levels;
    let controls = cfg.controls();
    let params = cfg.model;
    let cells = parallel_map(count, workers, |idx| {
        let epsilon = cfg.epsilons[idx / levels];
        let m = cfg.refinements[idx % levels];
        let mut record = SweepRecord {
            schema_version: SCHEMA_VERSION,
            n: params.n,
            hubble: params.hubble,
            p: params.p,
            kind: params.kind,
            epsilon,
            m,
            dt: f64::NAN,
            status: RecordStatus::Error,
            t_est: None,
            t_err: None,
            peak_sup: None,
        };
        let outcome = RadialGrid::for_light_cone(cfg.t_max, params.hubble, m)
            .and_then(|grid| {
                record.dt = grid.dt();
                evolve_until_blowup(&params, &cfg.data(epsilon), &grid, &controls)
            });
        match outcome {
            Ok(report) => {
                record.status = report.status.into();
                record.t_est = report.t_est;
                record.peak_sup = Some(report.peak_sup);
                Cell { record, series: Some(report.series), error: None, leak: report.support_leak }
            }
            Err(e) => Cell { record, series: None, error: Some(format!("epsilon={epsilon} m={m}: {e}")), leak: 0.0 },
        }
    });

    let mut records = Vec::with_capacity(count);
    let mut series = Vec::new();
    let mut errors = Vec::new();
    for (chunk_idx, chunk) in cells.chunks(levels).enumerate() {
        let times: Vec<Option<f64>> = chunk.iter().map(|c| c.record.t_est).collect();
        let t_err = lifespan_from_times(&times).ok().map(|l| l.error);
        for (level, cell) in chunk.iter().enumerate() {
            let mut record = cell.record.clone();
            if level + 1 == levels {
                record.t_err = t_err;
            }
            records.push(record);
            if let Some(e) = &cell.error {
                errors.push(e.clone());
            }
        }
        if let Some(s) = &chunk[levels - 1].series {
            series.push((cfg.epsilons[chunk_idx], s.clone()));
        }
    }
    let max_support_leak = cells.iter().fold(0.0f64, |acc, c| acc.max(c.leak));
    Ok(SweepRun {
        config: cfg.clone(),
        records,
        series,
        errors,
        warnings: cfg.window_warnings(),
        max_support_leak,
    })
}

/// `(ε, T_est)` at the finest level of every ε that blew up there.
pub fn lifespan_points(records: &[SweepRecord]) -> Vec<(f64, f64)> {
    let finest = records.iter().map(|r| r.m).max().unwrap_or(0);
    records
        .iter()
        .filter(|r| r.m == finest && r.status == RecordStatus::BlewUp)
        .filter_map(|r| r.t_est.map(|t| (r.epsilon, t)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted `-γ` in `T ≈ C ε^{slope}`.
    pub slope: f64,
    /// `log C`.
    pub intercept: f64,
    pub r_squared: f64,
    /// `log T - (slope log ε + intercept)` per point.
    pub residuals: Vec<f64>,
    pub n_points: usize,
}

/// Least-squares line through `(log ε, log T)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::validation(format!("power-law fit needs >= 3 blow-up points, got {}", points.len())));
    }
    if points.iter().any(|&(e, t)| !(e > 0.0 && t > 0.0)) {
        return Err(Error::validation("power-law fit needs positive epsilon and T"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::validation("power-law fit needs distinct epsilon values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FitResult { slope, intercept, r_squared, residuals, n_points: points.len() })
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// `γ` from the lifespan bound, when the exponent is subcritical.
    pub theoretical_exponent: Option<f64>,
    pub window_lo: Option<f64>,
    pub window_hi: Option<f64>,
}

impl FitReport {
    pub fn new(fit: &FitResult, cfg: &SweepConfig) -> Self {
        let window = cfg.model.epsilon_window();
        FitReport {
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            n_points: fit.n_points,
            theoretical_exponent: cfg.model.lifespan_exponent(),
            window_lo: window.map(|w| w.0),
            window_hi: window.map(|w| w.1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use std::path::PathBuf;

    #[test]
    fn exact_power_laws() {
        let eps = [1.0, 0.8, 0.6, 0.5, 0.3];
        let pts: Vec<(f64, f64)> = eps.iter().map(|&e: &f64| (e, 5.0 / e)).collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 5f64.ln()).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let pts: Vec<(f64, f64)> = eps.iter().map(|&e: &f64| (e, e.powf(-0.5))).collect();
        assert!((fit_power_law(&pts).unwrap().slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_power_law(&[(1.0, 1.0), (0.5, 2.0)]).is_err());
    }

    fn linear_cfg(epsilons: Vec<f64>) -> SweepConfig {
        SweepConfig {
            model: ModelParams { n: 3, hubble: 0.0, p: 2.0, kind: Nonlinearity::Linear },
            epsilons,
            t_max: 0.5,
            u_max: 1e8,
            sample_dt: 0.05,
            refinements: vec![128, 256],
            k_f: 4,
            k_g: 4,
            f_on: true,
            output_dir: PathBuf::from("unused"),
        }
    }

    #[test]
    fn linear_single_epsilon_survives() {
        let run = run_sweep(&linear_cfg(vec![1.0]), 2).unwrap();
        assert_eq!(run.records.len(), 2);
        assert!(run.records.iter().all(|r| r.status == RecordStatus::SurvivedToTmax));
        assert_eq!(run.records[1].t_err, None);
        assert_eq!(run.series.len(), 1);
        assert!(lifespan_points(&run.records).is_empty());
    }

    #[test]
    fn ordering_independent_of_workers() {
        let cfg = linear_cfg(vec![1.0, 0.5]);
        let a = run_sweep(&cfg, 1).unwrap();
        let b = run_sweep(&cfg, 4).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records[2].epsilon, 0.5);
        assert_eq!(a.records[2].m, 128);
    }
}
