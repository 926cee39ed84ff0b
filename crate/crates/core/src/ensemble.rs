//! Noise-averaged density matrices and spin-flip fidelity.
//!
//! Basis convention: `|0⟩` is the second basis vector, so the initial state
//! is `ρ0 = diag(0, 1)` and the Pauli-X image is `ρ_T = diag(1, 0)`. The
//! fidelity of the averaged state is `F(t) = tr{ρ(t) ρ_T}` with
//! `ρ(t) = (1/N) Σ_k U_k(t) ρ0 U_k(t)†`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Mat2;
use crate::propagator::{evolve_with, Drive, PropagatorError, PropagatorKind, Unitary2, DEFAULT_SUBSTEP};
use crate::pulse::PulseSpec;
use crate::rtn::{sample_trajectory, RtnError, RtnParams};

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("cannot average an empty set of unitaries")]
    Empty,
    #[error("n_trajectories must be at least 1")]
    NoTrajectories,
    #[error("time grid must be non-empty, non-negative and strictly increasing")]
    InvalidGrid,
    #[error("not a density matrix: {0}")]
    InvalidDensity(String),
    #[error(transparent)]
    Noise(#[from] RtnError),
    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: u64,
        #[source]
        source: PropagatorError,
    },
}

/// A 2×2 density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix2(pub Mat2);

impl DensityMatrix2 {
    pub fn new(m: Mat2) -> Result<Self, EnsembleError> {
        let rho = Self(m);
        rho.validate()?;
        Ok(rho)
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat2::diag(0.5, 0.5))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.0.max_abs_diff(&self.0.dagger())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = &self.0.m;
        let a = m[0][0].re;
        let d = m[1][1].re;
        let b = 0.5 * (m[0][1] + m[1][0].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - radius, mean + radius]
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let herm = self.hermiticity_defect();
        if herm > 1e-12 {
            return Err(EnsembleError::InvalidDensity(format!("hermiticity defect {herm:e}")));
        }
        let trace = self.0.trace();
        if (trace - 1.0).norm() > 1e-12 {
            return Err(EnsembleError::InvalidDensity(format!("trace {trace}")));
        }
        let low = self.eigenvalues()[0];
        if low < -1e-10 {
            return Err(EnsembleError::InvalidDensity(format!("negative eigenvalue {low:e}")));
        }
        Ok(())
    }
}

/// Initial state, target state and ideal gate of the spin-flip experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateTarget {
    pub rho0: DensityMatrix2,
    pub target: DensityMatrix2,
    pub gate: Mat2,
}

impl GateTarget {
    pub fn spin_flip() -> Self {
        let rho0 = DensityMatrix2(Mat2::diag(0.0, 1.0));
        let gate = Mat2::pauli_x();
        Self {
            rho0,
            target: DensityMatrix2(gate.conjugate(&rho0.0)),
            gate,
        }
    }
}

impl Default for GateTarget {
    fn default() -> Self {
        Self::spin_flip()
    }
}

/// Index-ordered mean of `U ρ0 U†`.
pub fn average_density(unitaries: &[Unitary2], rho0: &DensityMatrix2) -> Result<DensityMatrix2, EnsembleError> {
    if unitaries.is_empty() {
        return Err(EnsembleError::Empty);
    }
    let sum = unitaries
        .iter()
        .fold(Mat2::zero(), |acc, u| acc + u.0.conjugate(&rho0.0));
    Ok(DensityMatrix2(sum.scale(Complex64::new(1.0 / unitaries.len() as f64, 0.0))))
}

/// `tr{ρ ρ_T}`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix2, target: &GateTarget) -> f64 {
    (rho.0 * target.target.0).trace().re.clamp(0.0, 1.0)
}

/// Everything needed to run one noise ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub pulses: Vec<PulseSpec>,
    pub rtn: RtnParams,
    pub n_trajectories: usize,
    pub propagator: PropagatorKind,
    pub substep: f64,
    pub target: GateTarget,
}

impl EnsembleConfig {
    pub fn new(pulses: Vec<PulseSpec>, rtn: RtnParams, n_trajectories: usize) -> Self {
        Self {
            pulses,
            rtn,
            n_trajectories,
            propagator: PropagatorKind::default(),
            substep: DEFAULT_SUBSTEP,
            target: GateTarget::spin_flip(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub abscissa: f64,
    pub fidelity: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    TimeSweep,
    TauSweep,
    SequenceScan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub kind: SweepKind,
    pub n_trajectories: usize,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl FidelityCurve {
    pub fn abscissas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.abscissa).collect()
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.fidelity).collect()
    }
}

/// Per-trajectory unitaries at every grid time, in trajectory-index order.
pub fn trajectory_unitaries(config: &EnsembleConfig, grid: &[f64]) -> Result<Vec<Vec<Unitary2>>, EnsembleError> {
    if config.n_trajectories == 0 {
        return Err(EnsembleError::NoTrajectories);
    }
    let valid = !grid.is_empty()
        && grid[0] >= 0.0
        && grid.iter().all(|t| t.is_finite())
        && grid.windows(2).all(|w| w[0] < w[1]);
    if !valid {
        return Err(EnsembleError::InvalidGrid);
    }
    config.rtn.validate()?;
    let horizon = grid[grid.len() - 1].max(f64::MIN_POSITIVE);

    (0..config.n_trajectories as u64)
        .into_par_iter()
        .map(|index| {
            let noise = sample_trajectory(&config.rtn, horizon, index)?;
            let drive = Drive::new(&config.pulses, Some(&noise));
            evolve_with(&drive, config.propagator, config.substep, grid)
                .map_err(|source| EnsembleError::Trajectory { index, source })
        })
        .collect()
}

/// Ensemble fidelity and its Monte-Carlo standard error at one time slice.
pub fn fidelity_with_stderr(unitaries: &[Unitary2], target: &GateTarget) -> Result<(f64, f64), EnsembleError> {
    let rho = average_density(unitaries, &target.rho0)?;
    let f = fidelity(&rho, target);
    let n = unitaries.len();
    if n < 2 {
        return Ok((f, 0.0));
    }
    let samples: Vec<f64> = unitaries
        .iter()
        .map(|u| fidelity(&DensityMatrix2(u.0.conjugate(&target.rho0.0)), target))
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((f, (var / n as f64).sqrt()))
}

/// Fidelity of the averaged state at each time of `grid`.
pub fn fidelity_curve(config: &EnsembleConfig, grid: &[f64]) -> Result<FidelityCurve, EnsembleError> {
    let per_trajectory = trajectory_unitaries(config, grid)?;
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let slice: Vec<Unitary2> = per_trajectory.iter().map(|us| us[i]).collect();
            let (fidelity, stderr) = fidelity_with_stderr(&slice, &config.target)?;
            Ok(CurvePoint {
                abscissa: t,
                fidelity,
                stderr,
            })
        })
        .collect::<Result<Vec<_>, EnsembleError>>()?;
    Ok(FidelityCurve {
        kind: SweepKind::TimeSweep,
        n_trajectories: config.n_trajectories,
        seed: config.rtn.seed,
        points,
    })
}

/// `start, start + step, …` up to and including `stop` (within half a step).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || stop < start {
        return Vec::new();
    }
    let n = ((stop - start) / step + 0.5).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}
