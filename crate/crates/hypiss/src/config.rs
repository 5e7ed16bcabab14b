//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use hypiss_core::control::{self, Plant, SynthesisOptions};
use hypiss_core::pde::{Axis, Grid, Phase, SignalSpec, SimConfig};
use hypiss_core::sdp::SolveOptions;
use hypiss_core::{DiagMatrix, Matrix};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A problem with a config file, located by its JSON path.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
}

impl ConfigError {
    pub fn at(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
        ConfigError::Schema { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub design: DesignConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub lambda: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub n: Vec<Vec<f64>>,
    pub u_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub mu: ParamSpec,
    pub alpha: ParamSpec,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Slack of the well-posedness constants.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Gain used by the dissipation bound.
    #[serde(default = "default_chi")]
    pub chi: f64,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_epsilon() -> f64 {
    hypiss_core::lmi::DEFAULT_EPSILON
}

fn default_delta() -> f64 {
    control::DEFAULT_WELLPOSEDNESS_SLACK
}

fn default_chi() -> f64 {
    1.0
}

/// A single value, an explicit list, or `count` evenly spaced values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Scalar(f64),
    List(Vec<f64>),
    Range { min: f64, max: f64, count: usize },
}

impl ParamSpec {
    pub fn values(&self, path: &str) -> Result<Vec<f64>, ConfigError> {
        let v = match self {
            ParamSpec::Scalar(x) => vec![*x],
            ParamSpec::List(xs) => xs.clone(),
            ParamSpec::Range { min, max, count } => linspace(*min, *max, *count).map_err(|m| ConfigError::at(path, m))?,
        };
        control::validate_grid(&v).map_err(|e| ConfigError::at(path, e.to_string()))?;
        Ok(v)
    }

    pub fn scalar(&self, path: &str) -> Result<f64, ConfigError> {
        match self {
            ParamSpec::Scalar(x) => {
                self.values(path)?;
                Ok(*x)
            }
            _ => Err(ConfigError::at(path, "expected a single number, found a grid")),
        }
    }
}

fn linspace(min: f64, max: f64, count: usize) -> Result<Vec<f64>, &'static str> {
    match count {
        0 => Err("count must be at least 1"),
        1 if min == max => Ok(vec![min]),
        1 => Err("count 1 requires min == max"),
        _ => {
            let last = (count - 1) as f64;
            let mut v: Vec<f64> = (0..count).map(|i| (min * (last - i as f64) + max * i as f64) / last).collect();
            v[count - 1] = max;
            Ok(v)
        }
    }
}

/// Overrides of the solver defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_newton_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_barrier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier_growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasibility_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable_bound: Option<f64>,
}

impl SolverConfig {
    fn resolve(&self) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions {
            max_newton_iterations: self.max_newton_iterations.unwrap_or(d.max_newton_iterations),
            initial_barrier: self.initial_barrier.unwrap_or(d.initial_barrier),
            barrier_growth: self.barrier_growth.unwrap_or(d.barrier_growth),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            infeasibility_threshold: self.infeasibility_threshold.unwrap_or(d.infeasibility_threshold),
            variable_bound: self.variable_bound.unwrap_or(d.variable_bound),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Number of cells `M`.
    pub cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_final: f64,
    pub disturbance: SignalConfig,
    pub initial: SignalConfig,
    /// Steps between recorded samples; by default at most 2000 samples are kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
}

fn default_cfl() -> f64 {
    0.9
}

const MAX_RECORDED: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConfig {
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisConfig {
    Space,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalConfig {
    Zero { components: usize },
    SinusoidalProduct { amplitude: f64, phases: Vec<PhaseConfig> },
    CosineProfile { amplitude: f64, frequencies: Vec<f64> },
    Tabulated { axis: AxisConfig, points: Vec<f64>, values: Vec<Vec<f64>> },
}

impl SignalConfig {
    fn to_spec(&self) -> SignalSpec {
        match self {
            SignalConfig::Zero { components } => SignalSpec::Zero { components: *components },
            SignalConfig::SinusoidalProduct { amplitude, phases } => SignalSpec::SinusoidalProduct {
                amplitude: *amplitude,
                phases: phases
                    .iter()
                    .map(|p| match p {
                        PhaseConfig::Sin => Phase::Sin,
                        PhaseConfig::Cos => Phase::Cos,
                    })
                    .collect(),
            },
            SignalConfig::CosineProfile { amplitude, frequencies } => {
                SignalSpec::CosineProfile { amplitude: *amplitude, frequencies: frequencies.clone() }
            }
            SignalConfig::Tabulated { axis, points, values } => SignalSpec::Tabulated {
                axis: match axis {
                    AxisConfig::Space => Axis::Space,
                    AxisConfig::Time => Axis::Time,
                },
                points: points.clone(),
                values: values.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub certificate: bool,
    #[serde(default = "yes")]
    pub norms: bool,
    #[serde(default = "yes")]
    pub controls: bool,
    #[serde(default)]
    pub snapshots: bool,
    /// Also run `K = 0` next to a closed-loop simulation.
    #[serde(default = "yes")]
    pub open_loop: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            certificate: true,
            norms: true,
            controls: true,
            snapshots: false,
            open_loop: true,
        }
    }
}

/// A parsed config together with the digest of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub digest: String,
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::at(if path == "." { "config".to_string() } else { path }, e.into_inner().to_string())
    })
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = fs::read(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| ConfigError::at("config", "not valid UTF-8"))?;
    Ok(LoadedConfig { config: parse(&text)?, digest: hex::encode(Sha256::digest(&bytes)) })
}

pub(crate) fn matrix(path: &str, rows: &[Vec<f64>], shape: (Option<usize>, Option<usize>)) -> Result<Matrix, ConfigError> {
    if rows.is_empty() {
        return Err(ConfigError::at(path, "matrix has no rows"));
    }
    if let Some(r) = shape.0 {
        if rows.len() != r {
            return Err(ConfigError::at(path, format!("expected {r} rows, found {}", rows.len())));
        }
    }
    let cols = shape.1.unwrap_or(rows[0].len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(ConfigError::at(format!("{path}[{i}]"), format!("expected {cols} columns, found {}", row.len())));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(ConfigError::at(format!("{path}[{i}][{j}]"), "not finite"));
        }
    }
    Matrix::from_rows(rows).map_err(|e| ConfigError::at(path, e.to_string()))
}

impl PlantConfig {
    pub fn to_plant(&self) -> Result<Plant, ConfigError> {
        let n = self.lambda.len();
        if n == 0 {
            return Err(ConfigError::at("plant.lambda", "must not be empty"));
        }
        if let Some(i) = self.lambda.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(ConfigError::at(format!("plant.lambda[{i}]"), "must be positive"));
        }
        let m = self.u_max.len();
        if m == 0 {
            return Err(ConfigError::at("plant.u_max", "must not be empty"));
        }
        if let Some(i) = self.u_max.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(ConfigError::at(format!("plant.u_max[{i}]"), "must be positive"));
        }
        let h = matrix("plant.h", &self.h, (Some(n), Some(n)))?;
        let b = matrix("plant.b", &self.b, (Some(n), Some(m)))?;
        let nm = matrix("plant.n", &self.n, (Some(n), None))?;
        let lambda = DiagMatrix::new(self.lambda.clone()).map_err(|e| ConfigError::at("plant.lambda", e.to_string()))?;
        Plant::new(lambda, h, b, nm, self.u_max.clone()).map_err(|e| ConfigError::at("plant", e.to_string()))
    }
}

impl DesignConfig {
    pub fn synthesis_options(&self) -> Result<SynthesisOptions, ConfigError> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(ConfigError::at("design.epsilon", "must be a non-negative number"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(ConfigError::at("design.delta", "must be positive"));
        }
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(ConfigError::at("design.chi", "must be positive"));
        }
        let solver = self.solver.resolve();
        solver.validate().map_err(|e| ConfigError::at("design.solver", e.to_string()))?;
        Ok(SynthesisOptions { epsilon: self.epsilon, solver })
    }
}

impl SimulationConfig {
    pub fn to_sim_config(&self, plant: &Plant, record_snapshots: bool) -> Result<SimConfig, ConfigError> {
        let grid = Grid::new(self.cells).map_err(|e| ConfigError::at("simulation.cells", e.to_string()))?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(ConfigError::at("simulation.t_final", "must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(ConfigError::at("simulation.cfl", "must lie in (0, 1]"));
        }
        let disturbance = self.disturbance.to_spec();
        let initial = self.initial.to_spec();
        for (name, spec, want) in [("disturbance", &disturbance, plant.disturbances()), ("initial", &initial, plant.states())] {
            let path = format!("simulation.{name}");
            spec.validate(self.t_final).map_err(|e| ConfigError::at(&path, e.to_string()))?;
            if spec.components() != want {
                return Err(ConfigError::at(path, format!("expected {want} components, found {}", spec.components())));
            }
        }
        let mut cfg = SimConfig {
            grid,
            t_final: self.t_final,
            cfl: self.cfl,
            disturbance,
            initial,
            snapshot_stride: 1,
            record_snapshots,
            lyapunov: None,
        };
        let (_, steps) = cfg.time_step(plant);
        cfg.snapshot_stride = match self.snapshot_stride {
            Some(0) => return Err(ConfigError::at("simulation.snapshot_stride", "must be positive")),
            Some(s) => s,
            None => steps.div_ceil(MAX_RECORDED).max(1),
        };
        cfg.validate(plant).map_err(|e| ConfigError::at("simulation", e.to_string()))?;
        Ok(cfg)
    }
}
