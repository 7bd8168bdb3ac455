//! JSON run configurations. Every optional field has a default that is
//! written back out next to the artifacts.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::odelab::{FeasibilityControls, GeneralizedWeights, KatoHypothesis, KatoProblem, OdeControls, RegionGrid};
use crate::solver::{InitialDataSpec, RadialGrid, RunControls, DEFAULT_BUMP_ORDER, DEFAULT_U_MAX};

fn default_k() -> u32 {
    DEFAULT_BUMP_ORDER
}

fn default_true() -> bool {
    true
}

fn default_u_max() -> f64 {
    DEFAULT_U_MAX
}

fn default_sample_dt() -> f64 {
    0.01
}

fn default_refinements() -> Vec<usize> {
    vec![1024, 2048]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

/// One evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub model: ModelParams,
    #[serde(default = "default_data")]
    pub data: InitialDataSpec,
    pub m: usize,
    #[serde(rename = "T_max")]
    pub t_max: f64,
    #[serde(rename = "U_max", default = "default_u_max")]
    pub u_max: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_data() -> InitialDataSpec {
    InitialDataSpec::default()
}

impl SimulateConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.data.validate()?;
        self.controls().validate()?;
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::for_light_cone(self.t_max, self.model.hubble, self.m)
    }

    pub fn controls(&self) -> RunControls {
        RunControls { t_max: self.t_max, u_max: self.u_max, sample_dt: self.sample_dt }
    }
}

/// An amplitude sweep at fixed equation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: ModelParams,
    /// Amplitudes, strictly descending in `(0, 1]`.
    pub epsilons: Vec<f64>,
    #[serde(rename = "T_max")]
    pub t_max: f64,
    #[serde(rename = "U_max", default = "default_u_max")]
    pub u_max: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    /// Grid sizes `m`, strictly ascending; the last one is the reported level.
    #[serde(default = "default_refinements")]
    pub refinements: Vec<usize>,
    #[serde(default = "default_k")]
    pub k_f: u32,
    #[serde(default = "default_k")]
    pub k_g: u32,
    #[serde(default = "default_true")]
    pub f_on: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epsilons.is_empty() {
            return Err(Error::validation("epsilons must not be empty"));
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::validation("every epsilon must lie in (0, 1]"));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::validation("epsilons must be strictly descending"));
        }
        if self.refinements.is_empty() || self.refinements.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("refinements must be non-empty and strictly ascending"));
        }
        self.controls().validate()?;
        for &m in &self.refinements {
            RadialGrid::for_light_cone(self.t_max, self.model.hubble, m)?;
        }
        self.data(1.0).validate()
    }

    pub fn controls(&self) -> RunControls {
        RunControls { t_max: self.t_max, u_max: self.u_max, sample_dt: self.sample_dt }
    }

    pub fn data(&self, epsilon: f64) -> InitialDataSpec {
        InitialDataSpec { epsilon, k_f: self.k_f, k_g: self.k_g, f_on: self.f_on, g_on: true }
    }

    /// Amplitudes below the lower end of the lifespan window; these still
    /// run, the bound is just not asserted there.
    pub fn window_warnings(&self) -> Vec<String> {
        let Some((lo, _)) = self.model.epsilon_window() else {
            return Vec::new();
        };
        self.epsilons
            .iter()
            .filter(|&&e| e < lo)
            .map(|e| format!("epsilon = {e} is below the lifespan window lower end {lo:.6}"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleConfig {
    pub a1: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightsConfig {
    pub weights: GeneralizedWeights,
    pub hypothesis: KatoHypothesis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityConfig {
    #[serde(flatten)]
    pub setup: WeightsConfig,
    pub search: FeasibilityControls,
}

/// One criterion ODE, optionally rescaled, plus an optional feasibility
/// query on the same `A`, `R`, `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeLabConfig {
    pub problem: KatoProblem,
    #[serde(default)]
    pub controls: OdeControls,
    #[serde(default)]
    pub rescale: Option<RescaleConfig>,
    #[serde(default)]
    pub feasibility: Option<FeasibilityConfig>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl OdeLabConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.problem.validate()?;
        cfg.controls.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMapConfig {
    pub grid: RegionGrid,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl RegionMapConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        if cfg.grid.p_values.is_empty() || cfg.grid.b1_values.is_empty() {
            return Err(Error::validation("region grid must have at least one p and one b1"));
        }
        cfg.grid.controls.validate()?;
        Ok(cfg)
    }
}
