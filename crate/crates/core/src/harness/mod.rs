//! Batch drivers: amplitude sweeps, power-law fits and artifact output.

mod config;
mod io;
mod sweep;

pub use config::{
    FeasibilityConfig, OdeLabConfig, RegionMapConfig, RescaleConfig, SimulateConfig, SweepConfig,
    WeightsConfig,
};
pub use io::{
    format_epsilon, read_region_map_csv, read_sweep_csv, write_fit_json, write_json, write_outputs,
    write_plot_files, write_region_map_csv, write_series_csv, write_sweep_csv, RegionRow, SCHEMA_VERSION,
};
pub use sweep::{fit_power_law, lifespan_points, run_sweep, FitReport, FitResult, RecordStatus, SweepRecord, SweepRun};

use rayon::prelude::*;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "DSLAB_WORKERS";

/// Worker count from `DSLAB_WORKERS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Evaluates `f(0..count)` on `workers` threads; the result is indexed by
/// input position, independent of completion order.
pub fn parallel_map<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let workers = workers.max(1);
    if workers == 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_preserves_order() {
        let seq = parallel_map(100, 1, |i| i * i);
        let par = parallel_map(100, 4, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(par[7], 49);
    }
}
