//! Run configuration: JSON schema, validation and flag overrides.

use std::path::{Path, PathBuf};

use qbm_core::bath::{markovian_coefficients, BathConfig, SpectralDensity, WEAK_COUPLING_WARN};
use qbm_core::experiments::{Mode, SweepSpec, TimeGrid};
use qbm_core::gaussian::StateParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const DEFAULT_OUTPUT_DIR: &str = "qbm-output";

/// Experiment kinds with their required and optional fields, as shown by `qbm list`.
pub const EXPERIMENTS: [(&str, &str, &str); 7] = [
    ("trajectory", "state, bath", "grid, mode, decorrelated"),
    ("zero_temp", "g_values, bath", "s, d, lambda, grid"),
    ("sweep", "s, n_samples, seed, bath", "grid, mode, write_traces"),
    ("entanglement_curve", "s, bath", "d_step, grid, mode"),
    ("power_law", "s, baths", "d_step, grid, mode"),
    ("markov_compare", "g_values, bath", "s, d, lambda, grid"),
    ("sigma_compare", "g_values, bath", "s, d, lambda, grid"),
];

fn default_mode() -> Mode {
    Mode::Exact
}

fn yes() -> bool {
    true
}

fn two() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

fn quarter() -> f64 {
    0.25
}

fn long_grid() -> TimeGrid {
    TimeGrid::new(400.0, 16001)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub state: StateParams,
    pub bath: BathConfig,
    #[serde(default)]
    pub grid: TimeGrid,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Also run the product of the local states.
    #[serde(default = "yes")]
    pub decorrelated: bool,
}

/// Shared by `zero_temp`, `markov_compare` and `sigma_compare`: a family of
/// states differing only in `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    #[serde(default = "two")]
    pub s: f64,
    #[serde(default)]
    pub d: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    pub g_values: Vec<f64>,
    pub bath: BathConfig,
    #[serde(default)]
    pub grid: TimeGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaConfig {
    #[serde(default = "two")]
    pub s: f64,
    #[serde(default)]
    pub d: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    pub g_values: Vec<f64>,
    pub bath: BathConfig,
    #[serde(default = "long_grid")]
    pub grid: TimeGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub s: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub bath: BathConfig,
    #[serde(default)]
    pub grid: TimeGrid,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Write one CSV per realisation besides the summary.
    #[serde(default = "yes")]
    pub write_traces: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub s: f64,
    #[serde(default = "quarter")]
    pub d_step: f64,
    pub bath: BathConfig,
    #[serde(default)]
    pub grid: TimeGrid,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawConfig {
    pub s: f64,
    #[serde(default = "quarter")]
    pub d_step: f64,
    pub baths: Vec<BathConfig>,
    #[serde(default)]
    pub grid: TimeGrid,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum Experiment {
    Trajectory(TrajectoryConfig),
    ZeroTemp(FamilyConfig),
    Sweep(SweepConfig),
    EntanglementCurve(CurveConfig),
    PowerLaw(PowerLawConfig),
    MarkovCompare(FamilyConfig),
    SigmaCompare(SigmaConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Trajectory(_) => "trajectory",
            Experiment::ZeroTemp(_) => "zero_temp",
            Experiment::Sweep(_) => "sweep",
            Experiment::EntanglementCurve(_) => "entanglement_curve",
            Experiment::PowerLaw(_) => "power_law",
            Experiment::MarkovCompare(_) => "markov_compare",
            Experiment::SigmaCompare(_) => "sigma_compare",
        }
    }

    fn grid_mut(&mut self) -> &mut TimeGrid {
        match self {
            Experiment::Trajectory(c) => &mut c.grid,
            Experiment::ZeroTemp(c) | Experiment::MarkovCompare(c) => &mut c.grid,
            Experiment::Sweep(c) => &mut c.grid,
            Experiment::EntanglementCurve(c) => &mut c.grid,
            Experiment::PowerLaw(c) => &mut c.grid,
            Experiment::SigmaCompare(c) => &mut c.grid,
        }
    }

    fn baths(&self) -> Vec<&BathConfig> {
        match self {
            Experiment::Trajectory(c) => vec![&c.bath],
            Experiment::ZeroTemp(c) | Experiment::MarkovCompare(c) => vec![&c.bath],
            Experiment::Sweep(c) => vec![&c.bath],
            Experiment::EntanglementCurve(c) => vec![&c.bath],
            Experiment::PowerLaw(c) => c.baths.iter().collect(),
            Experiment::SigmaCompare(c) => vec![&c.bath],
        }
    }
}

/// A parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub points: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let map = value.as_object_mut().ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
        let output_dir = match map.remove("output_dir") {
            None | Some(Value::Null) => PathBuf::from(DEFAULT_OUTPUT_DIR),
            Some(Value::String(s)) => PathBuf::from(s),
            Some(other) => return Err(CliError::Config(format!("output_dir must be a string, got {other}"))),
        };
        if !map.contains_key("experiment") {
            return Err(CliError::Config("missing field `experiment`".into()));
        }
        let mut experiment: Experiment = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;

        if let Some(seed) = overrides.seed {
            match &mut experiment {
                Experiment::Sweep(c) => c.seed = seed,
                other => {
                    return Err(CliError::Config(format!("--seed applies to sweep runs, not {}", other.kind())));
                }
            }
        }
        if let Some(points) = overrides.points {
            experiment.grid_mut().n_points = points;
        }
        let config = RunConfig { experiment, output_dir: overrides.out.clone().unwrap_or(output_dir) };
        config.validate()?;
        Ok(config)
    }

    /// Semantic checks beyond the schema. Nothing is computed here.
    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |e: qbm_core::error::Error| CliError::Config(e.to_string());
        for bath in self.experiment.baths() {
            bath.check().map_err(invalid)?;
        }
        match &self.experiment {
            Experiment::Trajectory(c) => {
                c.grid.check().map_err(invalid)?;
                c.state.check_constraints().map_err(invalid)?;
                check_mode(c.mode, &c.bath)?;
            }
            Experiment::ZeroTemp(c) => {
                check_family(c.s, c.d, c.lambda, &c.g_values, c.grid)?;
                if !c.bath.is_zero_temperature() {
                    return Err(CliError::Config("zero_temp needs bath.beta = \"inf\"".into()));
                }
                if !matches!(c.bath.sd, SpectralDensity::Exponential { .. }) {
                    return Err(CliError::Config("zero_temp needs an exponential spectral density".into()));
                }
            }
            Experiment::Sweep(c) => {
                c.grid.check().map_err(invalid)?;
                SweepSpec { s: c.s, n_samples: c.n_samples, seed: c.seed }.check().map_err(invalid)?;
                check_mode(c.mode, &c.bath)?;
            }
            Experiment::EntanglementCurve(c) => {
                c.grid.check().map_err(invalid)?;
                check_slice(c.s, c.d_step)?;
                check_mode(c.mode, &c.bath)?;
            }
            Experiment::PowerLaw(c) => {
                c.grid.check().map_err(invalid)?;
                check_slice(c.s, c.d_step)?;
                if c.baths.is_empty() {
                    return Err(CliError::Config("baths must list at least one bath".into()));
                }
                if qbm_core::experiments::d_grid(c.s, c.d_step).len() < 3 {
                    return Err(CliError::Config("a power-law fit needs at least 3 values of d; reduce d_step".into()));
                }
                for bath in &c.baths {
                    check_mode(c.mode, bath)?;
                }
            }
            Experiment::MarkovCompare(c) => {
                check_family(c.s, c.d, c.lambda, &c.g_values, c.grid)?;
                check_mode(Mode::Markovian, &c.bath)?;
            }
            Experiment::SigmaCompare(c) => {
                check_family(c.s, c.d, c.lambda, &c.g_values, c.grid)?;
                check_mode(Mode::Markovian, &c.bath)?;
            }
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        self.experiment
            .baths()
            .iter()
            .filter(|b| b.alpha > WEAK_COUPLING_WARN)
            .map(|b| format!("alpha = {} exceeds {WEAK_COUPLING_WARN}; weak-coupling assumptions may fail", b.alpha))
            .collect()
    }
}

fn check_mode(mode: Mode, bath: &BathConfig) -> Result<(), CliError> {
    if mode == Mode::Markovian {
        markovian_coefficients(bath).map_err(|e| CliError::Config(format!("markovian mode: {e}")))?;
    }
    Ok(())
}

fn check_family(s: f64, d: f64, lambda: f64, g_values: &[f64], grid: TimeGrid) -> Result<(), CliError> {
    grid.check().map_err(|e| CliError::Config(e.to_string()))?;
    if g_values.is_empty() {
        return Err(CliError::Config("g_values must not be empty".into()));
    }
    for &g in g_values {
        StateParams::new(s, d, g, lambda).check_constraints().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn check_slice(s: f64, d_step: f64) -> Result<(), CliError> {
    StateParams::new(s, 0.0, 1.0, 1.0).check_constraints().map_err(|e| CliError::Config(e.to_string()))?;
    if !(d_step > 0.0 && d_step.is_finite()) {
        return Err(CliError::Config(format!("d_step = {d_step} must be positive")));
    }
    Ok(())
}
