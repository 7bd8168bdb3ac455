//! Artifact writers. Every CSV begins with a `# schema_version: N` comment
//! line and a fixed column order.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{inequality_ratio, FunctionalSeries};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::odelab::RegionCell;

use super::sweep::{lifespan_points, FitReport, SweepRecord, SweepRun};

pub const SCHEMA_VERSION: u32 = 1;

const SWEEP_COLUMNS: [&str; 12] =
    ["schema_version", "n", "H", "p", "kind", "epsilon", "m", "dt", "status", "T_est", "T_err", "peak_sup"];
const SERIES_COLUMNS: [&str; 7] = ["t", "sup_u", "G", "Gpp", "G1", "energy", "rho1"];
const REGION_COLUMNS: [&str; 4] = ["p", "b1", "status", "T_star"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(w, "# schema_version: {SCHEMA_VERSION}").map_err(io_err(path))?;
    Ok(w)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(io_err(path))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// `ε` as used in file names: shortest round-trip decimal.
pub fn format_epsilon(epsilon: f64) -> String {
    epsilon.to_string()
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SWEEP_COLUMNS).map_err(csv_err(path))?;
    for r in records {
        w.serialize(r).map_err(csv_err(path))?;
    }
    finish(w, path)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rd = csv_reader(path)?;
    let headers = rd.headers().map_err(csv_err(path))?.clone();
    if headers.iter().ne(SWEEP_COLUMNS) {
        return Err(Error::validation(format!("{}: unexpected sweep columns", path.display())));
    }
    rd.deserialize().map(|r| r.map_err(csv_err(path))).collect()
}

pub fn write_series_csv(path: &Path, series: &FunctionalSeries, params: &ModelParams) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SERIES_COLUMNS).map_err(csv_err(path))?;
    for s in &series.samples {
        let rho = inequality_ratio(s, params);
        let row = [
            s.t.to_string(),
            s.sup_u.to_string(),
            s.g.to_string(),
            s.gpp.to_string(),
            opt(s.g1),
            s.energy.to_string(),
            rho.to_string(),
        ];
        w.write_record(&row).map_err(csv_err(path))?;
    }
    finish(w, path)
}

pub fn write_region_map_csv(path: &Path, cells: &[RegionCell]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(REGION_COLUMNS).map_err(csv_err(path))?;
    for c in cells {
        let row = [c.p.to_string(), c.b1.to_string(), c.status().to_string(), opt(c.outcome.t_star())];
        w.write_record(&row).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// `(p, b₁, status, T*)` as stored in `region_map.csv`.
pub type RegionRow = (f64, f64, String, Option<f64>);

pub fn read_region_map_csv(path: &Path) -> Result<Vec<RegionRow>> {
    let mut rd = csv_reader(path)?;
    rd.deserialize().map(|r| r.map_err(csv_err(path))).collect()
}

fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn sci_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "null".to_string(), sci)
}

/// `fit.json` with every real printed to 17 significant digits.
pub fn write_fit_json(path: &Path, fit: &FitReport) -> Result<()> {
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"slope\": {},", sci(fit.slope));
    let _ = writeln!(s, "  \"intercept\": {},", sci(fit.intercept));
    let _ = writeln!(s, "  \"r_squared\": {},", sci(fit.r_squared));
    let _ = writeln!(s, "  \"n_points\": {},", fit.n_points);
    let _ = writeln!(s, "  \"theoretical_exponent\": {},", sci_opt(fit.theoretical_exponent));
    let _ = writeln!(s, "  \"window_lo\": {},", sci_opt(fit.window_lo));
    let _ = writeln!(s, "  \"window_hi\": {}", sci_opt(fit.window_hi));
    s.push_str("}\n");
    std::fs::write(path, s).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// `lifespan.dat` (two columns) and a gnuplot script drawing it on log axes.
pub fn write_plot_files(dir: &Path, points: &[(f64, f64)], fit: Option<&FitReport>) -> Result<Vec<PathBuf>> {
    let dat = dir.join("lifespan.dat");
    let mut body = String::from("# epsilon T_est\n");
    for &(e, t) in points {
        let _ = writeln!(body, "{e} {t}");
    }
    std::fs::write(&dat, body).map_err(io_err(&dat))?;

    let gp = dir.join("lifespan.gp");
    let mut script = String::new();
    script.push_str("set logscale xy\nset xlabel 'epsilon'\nset ylabel 'T_est'\nset key top right\n");
    match fit {
        Some(f) => {
            let _ = writeln!(script, "f(x) = exp({}) * x**({})", sci(f.intercept), sci(f.slope));
            script.push_str("plot 'lifespan.dat' using 1:2 with points title 'T_est', f(x) title 'fit'\n");
        }
        None => script.push_str("plot 'lifespan.dat' using 1:2 with points title 'T_est'\n"),
    }
    std::fs::write(&gp, script).map_err(io_err(&gp))?;
    Ok(vec![dat, gp])
}

/// Writes every sweep artifact into `dir` and returns the paths written.
pub fn write_outputs(run: &SweepRun, fit: Option<&FitReport>, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let cfg = dir.join("config.json");
    write_json(&cfg, &run.config)?;
    written.push(cfg);

    let sweep = dir.join("sweep.csv");
    write_sweep_csv(&sweep, &run.records)?;
    written.push(sweep);

    for (epsilon, series) in &run.series {
        let path = dir.join(format!("series_{}.csv", format_epsilon(*epsilon)));
        write_series_csv(&path, series, &run.config.model)?;
        written.push(path);
    }

    if let Some(f) = fit {
        let path = dir.join("fit.json");
        write_fit_json(&path, f)?;
        written.push(path);
    }
    written.extend(write_plot_files(dir, &lifespan_points(&run.records), fit)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::RecordStatus;
    use crate::model::Nonlinearity;
    use crate::odelab::OdeOutcome;

    fn record(epsilon: f64, status: RecordStatus, t_est: Option<f64>) -> SweepRecord {
        SweepRecord {
            schema_version: SCHEMA_VERSION,
            n: 3,
            hubble: 0.1,
            p: 2.0,
            kind: Nonlinearity::PowerU,
            epsilon,
            m: 2048,
            dt: 0.1 / 3.0,
            status,
            t_est,
            t_err: t_est.map(|t| t * 1e-3),
            peak_sup: Some(1.234_567_890_123_456_7e8),
        }
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&path, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("# schema_version: 1\n{}\n", SWEEP_COLUMNS.join(",")));
        assert!(read_sweep_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn sweep_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let recs = vec![
            record(1.0, RecordStatus::BlewUp, Some(std::f64::consts::E)),
            record(0.7, RecordStatus::SurvivedToTmax, None),
            record(0.1, RecordStatus::Error, None),
        ];
        write_sweep_csv(&path, &recs).unwrap();
        assert_eq!(read_sweep_csv(&path).unwrap(), recs);
    }

    #[test]
    fn fit_json_has_seventeen_digits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit.json");
        let fit = FitReport {
            slope: -1.0 / 3.0,
            intercept: 2f64.ln(),
            r_squared: 0.99,
            n_points: 6,
            theoretical_exponent: Some(1.0),
            window_lo: Some(0.5),
            window_hi: None,
        };
        write_fit_json(&path, &fit).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["slope"].as_f64().unwrap(), -1.0 / 3.0);
        assert!(v["window_hi"].is_null());
        assert!(text.contains("-3.3333333333333331e-1"));
        let back: FitReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fit);
    }

    #[test]
    fn region_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("region_map.csv");
        let cells = vec![
            RegionCell { p: 2.0, b1: 0.0, outcome: OdeOutcome::BlewUp { t_star: 2.5 }, error: None },
            RegionCell { p: 2.0, b1: 5.0, outcome: OdeOutcome::Survived, error: None },
        ];
        write_region_map_csv(&path, &cells).unwrap();
        let back = read_region_map_csv(&path).unwrap();
        assert_eq!(back[0], (2.0, 0.0, "BlewUp".to_string(), Some(2.5)));
        assert_eq!(back[1], (2.0, 5.0, "Survived".to_string(), None));
    }

    #[test]
    fn unwritable_directory_reports_path() {
        let err = write_sweep_csv(Path::new("/nonexistent/dir/sweep.csv"), &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/sweep.csv"));
    }
}
