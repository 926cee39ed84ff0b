//! Fidelity experiments: time sweeps, correlation-time sweeps, optimal-time
//! extraction and the axis-permutation scan over the three named pulses.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{fidelity_curve, CurvePoint, EnsembleConfig, EnsembleError, FidelityCurve, GateTarget, SweepKind};
use crate::propagator::{PropagatorKind, DEFAULT_SUBSTEP};
use crate::pulse::{Axis, PulseChoice, PulseName, PulseSpec};
use crate::rtn::RtnParams;

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("invalid axis assignment: {0}")]
    InvalidAssignment(String),
    #[error("{0} grid must be non-empty, positive and strictly increasing")]
    InvalidGrid(&'static str),
    #[error("gate time must be positive and finite, got {0}")]
    InvalidGateTime(f64),
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("no local maximum reaches fidelity {threshold}")]
    NoOptimum { threshold: f64 },
    #[error("tau = {tau}: {source}")]
    AtTau {
        tau: f64,
        #[source]
        source: EnsembleError,
    },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Which named pulse drives each axis. Labels list the x, y and z pulses in
/// that order, e.g. `QW-BP-C` is QW on x, BP on y and C on z.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisAssignment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<PulseChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<PulseChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<PulseChoice>,
}

impl AxisAssignment {
    pub fn single(name: PulseName, axis: Axis) -> Self {
        let mut a = Self::default();
        *a.slot_mut(axis) = Some(name.into());
        a
    }

    pub fn xyz(x: PulseName, y: PulseName, z: PulseName) -> Self {
        Self {
            x: Some(x.into()),
            y: Some(y.into()),
            z: Some(z.into()),
        }
    }

    fn slot_mut(&mut self, axis: Axis) -> &mut Option<PulseChoice> {
        match axis {
            Axis::X => &mut self.x,
            Axis::Y => &mut self.y,
            Axis::Z => &mut self.z,
        }
    }

    pub fn get(&self, axis: Axis) -> Option<PulseChoice> {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let used: Vec<PulseChoice> = Axis::ALL.iter().filter_map(|&a| self.get(a)).collect();
        if used.is_empty() {
            return Err(SweepError::InvalidAssignment("no axis assigned".into()));
        }
        for choice in &used {
            choice
                .validate()
                .map_err(|e| SweepError::InvalidAssignment(e.to_string()))?;
        }
        let names: Vec<PulseName> = used.iter().filter_map(PulseChoice::name).collect();
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(SweepError::InvalidAssignment(format!("pulse {name} reused")));
            }
        }
        Ok(())
    }

    pub fn pulses(&self) -> Vec<PulseSpec> {
        Axis::ALL
            .iter()
            .filter_map(|&axis| self.get(axis).map(|choice| choice.on(axis)))
            .collect()
    }

    pub fn label(&self) -> String {
        Axis::ALL
            .iter()
            .filter_map(|&a| self.get(a).map(|choice| choice.label()))
            .collect::<Vec<_>>()
            .join("-")
    }

    /// The six ways of placing C, QW and BP on x, y and z.
    pub fn permutations() -> Vec<AxisAssignment> {
        use PulseName::*;
        [
            (BP, C, QW),
            (BP, QW, C),
            (C, BP, QW),
            (C, QW, BP),
            (QW, BP, C),
            (QW, C, BP),
        ]
        .into_iter()
        .map(|(x, y, z)| AxisAssignment::xyz(x, y, z))
        .collect()
    }
}

impl fmt::Display for AxisAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for AxisAssignment {
    type Err = SweepError;

    /// Parses `x-y-z` labels such as `QW-BP-C`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let names: Vec<&str> = s.split('-').collect();
        if names.len() != 3 {
            return Err(SweepError::InvalidAssignment(format!("expected three pulses in `{s}`")));
        }
        let parse = |n: &str| n.parse::<PulseName>().map_err(|e| SweepError::InvalidAssignment(e.to_string()));
        let a = AxisAssignment::xyz(parse(names[0])?, parse(names[1])?, parse(names[2])?);
        a.validate()?;
        Ok(a)
    }
}

/// Shared ensemble settings for every sweep point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepParams {
    pub rtn: RtnParams,
    pub n_trajectories: usize,
    pub propagator: PropagatorKind,
    pub substep: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            rtn: RtnParams::default(),
            n_trajectories: 300,
            propagator: PropagatorKind::default(),
            substep: DEFAULT_SUBSTEP,
        }
    }
}

impl SweepParams {
    fn ensemble(&self, assignment: &AxisAssignment, tau: f64) -> EnsembleConfig {
        EnsembleConfig {
            pulses: assignment.pulses(),
            rtn: RtnParams { tau, ..self.rtn },
            n_trajectories: self.n_trajectories,
            propagator: self.propagator,
            substep: self.substep,
            target: GateTarget::spin_flip(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub label: String,
    pub n_trajectories: usize,
    pub seed: u64,
    pub rows: Vec<CurvePoint>,
}

impl SweepResult {
    pub fn curve(&self) -> FidelityCurve {
        FidelityCurve {
            kind: self.kind,
            n_trajectories: self.n_trajectories,
            seed: self.seed,
            points: self.rows.clone(),
        }
    }

    pub fn min_fidelity(&self) -> Option<&CurvePoint> {
        self.rows.iter().min_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
    }
}

fn check_grid(grid: &[f64], name: &'static str, allow_zero: bool) -> Result<(), SweepError> {
    let lower_ok = grid.first().is_some_and(|&g| if allow_zero { g >= 0.0 } else { g > 0.0 });
    if lower_ok && grid.iter().all(|g| g.is_finite()) && grid.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(SweepError::InvalidGrid(name))
    }
}

/// Fidelity against gate time at the correlation time in `params.rtn`.
pub fn time_sweep(assignment: &AxisAssignment, params: &SweepParams, grid: &[f64]) -> Result<SweepResult, SweepError> {
    assignment.validate()?;
    check_grid(grid, "time", true)?;
    let curve = fidelity_curve(&params.ensemble(assignment, params.rtn.tau), grid)?;
    Ok(SweepResult {
        kind: SweepKind::TimeSweep,
        label: assignment.label(),
        n_trajectories: params.n_trajectories,
        seed: params.rtn.seed,
        rows: curve.points,
    })
}

/// Fidelity at a fixed gate time against the noise correlation time.
pub fn tau_sweep(
    assignment: &AxisAssignment,
    gate_time: f64,
    taus: &[f64],
    params: &SweepParams,
) -> Result<SweepResult, SweepError> {
    assignment.validate()?;
    if !(gate_time.is_finite() && gate_time > 0.0) {
        return Err(SweepError::InvalidGateTime(gate_time));
    }
    check_grid(taus, "tau", false)?;
    let rows = taus
        .par_iter()
        .map(|&tau| {
            let curve = fidelity_curve(&params.ensemble(assignment, tau), &[gate_time])
                .map_err(|source| SweepError::AtTau { tau, source })?;
            let p = curve.points[0];
            Ok(CurvePoint { abscissa: tau, ..p })
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    Ok(SweepResult {
        kind: SweepKind::TauSweep,
        label: assignment.label(),
        n_trajectories: params.n_trajectories,
        seed: params.rtn.seed,
        rows,
    })
}

/// A refined local maximum of a fidelity curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    /// Vertex of the parabola through the three grid points around the peak.
    pub time: f64,
    /// Fidelity at the peak grid point.
    pub fidelity: f64,
}

/// Vertex of the parabola through three points with distinct abscissas.
fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if curvature >= 0.0 || !curvature.is_finite() {
        return x1;
    }
    // p(x) = y0 + d01 (x − x0) + c (x − x0)(x − x1)
    let vertex = 0.5 * (x0 + x1) - d01 / (2.0 * curvature);
    vertex.clamp(x0, x2)
}

/// All interior local maxima of the curve, refined, in increasing time.
pub fn local_maxima(points: &[CurvePoint]) -> Vec<Optimum> {
    points
        .windows(3)
        .filter(|w| w[1].fidelity > w[0].fidelity && w[1].fidelity >= w[2].fidelity)
        .map(|w| Optimum {
            time: parabola_vertex(
                (w[0].abscissa, w[0].fidelity),
                (w[1].abscissa, w[1].fidelity),
                (w[2].abscissa, w[2].fidelity),
            ),
            fidelity: w[1].fidelity,
        })
        .collect()
}

/// Local maxima with fidelity at or above `threshold`.
pub fn find_optimal_times(curve: &FidelityCurve, threshold: f64) -> Result<Vec<Optimum>, SweepError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(SweepError::InvalidThreshold(threshold));
    }
    let found: Vec<Optimum> = local_maxima(&curve.points)
        .into_iter()
        .filter(|o| o.fidelity >= threshold)
        .collect();
    if found.is_empty() {
        Err(SweepError::NoOptimum { threshold })
    } else {
        Ok(found)
    }
}

/// Highest local maximum; falls back to the best grid point of a monotone curve.
pub fn peak(points: &[CurvePoint]) -> Option<Optimum> {
    local_maxima(points)
        .into_iter()
        .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
        .or_else(|| {
            points
                .iter()
                .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
                .map(|p| Optimum {
                    time: p.abscissa,
                    fidelity: p.fidelity,
                })
        })
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// 40 log-spaced correlation times in `[1e-3, 20]`.
pub fn default_tau_grid() -> Vec<f64> {
    log_grid(1e-3, 20.0, 40)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub assignment: AxisAssignment,
    pub label: String,
    pub time_curve: SweepResult,
    /// Local maxima of the time curve at or above the scan threshold.
    pub optima: Vec<Optimum>,
    /// Highest local maximum of the time curve; the τ sweep runs here.
    pub principal: Optimum,
    pub tau_curve: SweepResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceScan {
    pub threshold: f64,
    pub entries: Vec<SequenceEntry>,
}

impl SequenceScan {
    pub fn entry(&self, label: &str) -> Option<&SequenceEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}

/// For each assignment: time curve at `params.rtn.tau`, its optima, and a τ
/// sweep at the principal optimum.
pub fn sequence_scan(
    sequences: &[AxisAssignment],
    params: &SweepParams,
    time_grid: &[f64],
    tau_grid: &[f64],
    threshold: f64,
) -> Result<SequenceScan, SweepError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(SweepError::InvalidThreshold(threshold));
    }
    check_grid(tau_grid, "tau", false)?;
    let entries = sequences
        .iter()
        .map(|assignment| {
            let time_curve = time_sweep(assignment, params, time_grid)?;
            let optima = match find_optimal_times(&time_curve.curve(), threshold) {
                Ok(o) => o,
                Err(SweepError::NoOptimum { .. }) => Vec::new(),
                Err(e) => return Err(e),
            };
            let principal = peak(&time_curve.rows).ok_or(SweepError::InvalidGrid("time"))?;
            let gate_time = if principal.time > 0.0 {
                principal.time
            } else {
                return Err(SweepError::InvalidGateTime(principal.time));
            };
            let tau_curve = tau_sweep(assignment, gate_time, tau_grid, params)?;
            Ok(SequenceEntry {
                assignment: *assignment,
                label: assignment.label(),
                time_curve,
                optima,
                principal,
                tau_curve,
            })
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    Ok(SequenceScan { threshold, entries })
}
