//! JSON run configuration.
//!
//! ```json
//! {
//!   "experiment": "time-sweep",
//!   "pulses": { "x": "C" },
//!   "rtn": { "delta": 0.125, "tau": 0.001, "mode": "formula-resampled" },
//!   "seed": 0,
//!   "n_trajectories": 300,
//!   "propagator": "disentangle",
//!   "substep": 0.001,
//!   "time_grid": { "start": 0.0, "stop": 10.0, "step": 0.01 },
//!   "tau_grid": { "start": 0.001, "stop": 20.0, "points": 40 },
//!   "gate_time": null,
//!   "sequences": null,
//!   "threshold": 0.999,
//!   "output": { "dir": "out", "format": "csv" }
//! }
//! ```
//!
//! Every key is optional (`experiment` defaults to `time-sweep`); `master_seed`
//! is accepted for `seed`. Unknown keys are rejected.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::uniform_grid;
use crate::propagator::{PropagatorKind, DEFAULT_SUBSTEP};
use crate::rtn::{RtnMode, RtnParams};
use crate::sweep::{log_grid, AxisAssignment, SweepError, SweepParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    #[error("invalid configuration: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

impl ConfigError {
    /// Key paths named by the error.
    pub fn paths(&self) -> Vec<&str> {
        match self {
            ConfigError::Syntax { path, .. } => vec![path.as_str()],
            ConfigError::Invalid(v) => v.iter().map(|v| v.path.as_str()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    TimeSweep,
    TauSweep,
    SequenceScan,
    ValidateUnitarity,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::TimeSweep => "time-sweep",
            Experiment::TauSweep => "tau-sweep",
            Experiment::SequenceScan => "sequence-scan",
            Experiment::ValidateUnitarity => "validate-unitarity",
        }
    }
}

fn default_delta() -> f64 {
    0.125
}

fn default_tau() -> f64 {
    1e-3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RtnSection {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub mode: RtnMode,
}

impl Default for RtnSection {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            tau: default_tau(),
            mode: RtnMode::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 10.0,
            step: 0.01,
        }
    }
}

impl TimeGrid {
    pub fn points(&self) -> Vec<f64> {
        uniform_grid(self.start, self.stop, self.step)
    }
}

/// Log-spaced correlation times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for TauGrid {
    fn default() -> Self {
        Self {
            start: 1e-3,
            stop: 20.0,
            points: 40,
        }
    }
}

impl TauGrid {
    pub fn values(&self) -> Vec<f64> {
        log_grid(self.start, self.stop, self.points)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
}

fn default_out_dir() -> String {
    "out".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            format: OutputFormat::Csv,
        }
    }
}

fn default_trajectories() -> usize {
    300
}

fn default_substep() -> f64 {
    DEFAULT_SUBSTEP
}

fn default_threshold() -> f64 {
    0.999
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub pulses: Option<AxisAssignment>,
    #[serde(default)]
    pub rtn: RtnSection,
    #[serde(default, alias = "master_seed")]
    pub seed: u64,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    #[serde(default)]
    pub propagator: PropagatorKind,
    #[serde(default = "default_substep")]
    pub substep: f64,
    #[serde(default)]
    pub time_grid: TimeGrid,
    #[serde(default)]
    pub tau_grid: TauGrid,
    #[serde(default)]
    pub gate_time: Option<f64>,
    #[serde(default)]
    pub sequences: Option<Vec<String>>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn rtn_params(&self) -> RtnParams {
        RtnParams {
            delta: self.rtn.delta,
            tau: self.rtn.tau,
            mode: self.rtn.mode,
            seed: self.seed,
        }
    }

    pub fn sweep_params(&self) -> SweepParams {
        SweepParams {
            rtn: self.rtn_params(),
            n_trajectories: self.n_trajectories,
            propagator: self.propagator,
            substep: self.substep,
        }
    }

    /// Parsed sequence labels (all six permutations when unset).
    pub fn sequence_assignments(&self) -> Result<Vec<AxisAssignment>, SweepError> {
        match &self.sequences {
            None => Ok(AxisAssignment::permutations()),
            Some(labels) => labels.iter().map(|l| l.parse()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |path: &str, message: String| {
            out.push(Violation {
                path: path.to_string(),
                message,
            })
        };

        if !(self.rtn.delta.is_finite() && self.rtn.delta >= 0.0) {
            bad("rtn.delta", format!("must be >= 0, got {}", self.rtn.delta));
        }
        if !(self.rtn.tau.is_finite() && self.rtn.tau > 0.0) {
            bad("rtn.tau", format!("must be > 0, got {}", self.rtn.tau));
        }
        if self.n_trajectories == 0 {
            bad("n_trajectories", "must be at least 1".into());
        }
        if !(self.substep.is_finite() && self.substep > 0.0) {
            bad("substep", format!("must be > 0, got {}", self.substep));
        }
        let tg = &self.time_grid;
        if !(tg.start.is_finite() && tg.start >= 0.0) {
            bad("time_grid.start", format!("must be >= 0, got {}", tg.start));
        }
        if !(tg.stop.is_finite() && tg.stop > tg.start) {
            bad("time_grid.stop", format!("must exceed start, got {}", tg.stop));
        }
        if !(tg.step.is_finite() && tg.step > 0.0) {
            bad("time_grid.step", format!("must be > 0, got {}", tg.step));
        }
        let taus = &self.tau_grid;
        if !(taus.start.is_finite() && taus.start > 0.0) {
            bad("tau_grid.start", format!("must be > 0, got {}", taus.start));
        }
        if !(taus.stop.is_finite() && taus.stop > taus.start) {
            bad("tau_grid.stop", format!("must exceed start, got {}", taus.stop));
        }
        if taus.points < 2 {
            bad("tau_grid.points", format!("must be at least 2, got {}", taus.points));
        }
        if let Some(t) = self.gate_time {
            if !(t.is_finite() && t > 0.0) {
                bad("gate_time", format!("must be > 0, got {t}"));
            }
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            bad("threshold", format!("must lie in (0, 1], got {}", self.threshold));
        }
        if let Some(p) = &self.pulses {
            if let Err(e) = p.validate() {
                bad("pulses", e.to_string());
            }
        }
        if let Some(labels) = &self.sequences {
            if labels.is_empty() {
                bad("sequences", "must not be empty".into());
            }
            for (i, l) in labels.iter().enumerate() {
                if let Err(e) = l.parse::<AxisAssignment>() {
                    bad(&format!("sequences[{i}]"), e.to_string());
                }
            }
        }
        match self.experiment {
            Experiment::TimeSweep | Experiment::TauSweep if self.pulses.is_none() => {
                bad("pulses", format!("required for {}", self.experiment.as_str()));
            }
            Experiment::TauSweep if self.gate_time.is_none() => {
                bad("gate_time", "required for tau-sweep".into());
            }
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }
}

/// Parses and validates a JSON configuration, applying defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Syntax {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if config.experiment == Experiment::SequenceScan && config.sequences.is_none() {
        config.sequences = Some(AxisAssignment::permutations().iter().map(AxisAssignment::label).collect());
    }
    config.validate()?;
    Ok(config)
}
