//! Random telegraph noise trajectories.
//!
//! A trajectory is stored as an initial sign plus the ordered list of times at
//! which the sign flips. Its value is `±delta` everywhere.
//!
//! Three generators are available:
//!
//! * [`RtnMode::FormulaPhase`]: `η(t) = Δ sgn(sin(t/τ − r))` with a single
//!   `r = ln p`, `p ~ U(0, 1)`. Jumps are evenly spaced by `πτ`.
//! * [`RtnMode::FormulaResampled`]: same functional form, but a fresh `r` is
//!   drawn after every jump and the next jump is the next zero of the new
//!   carrier. Jump spacing is irregular.
//! * [`RtnMode::Markov`]: exponential waiting times with mean `τ`.
//!
//! Every trajectory is a pure function of `(seed, trajectory_index)`: the
//! generator is a ChaCha stream keyed by the master seed, with the trajectory
//! index selecting the stream.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RtnError {
    #[error("noise horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("correlation time tau must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("noise amplitude delta must be non-negative and finite, got {0}")]
    InvalidDelta(f64),
    #[error("time {t} outside the trajectory horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },
    #[error("unknown noise mode `{0}` (expected formula-phase, formula-resampled or markov)")]
    UnknownMode(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RtnMode {
    FormulaPhase,
    #[default]
    FormulaResampled,
    Markov,
}

impl RtnMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RtnMode::FormulaPhase => "formula-phase",
            RtnMode::FormulaResampled => "formula-resampled",
            RtnMode::Markov => "markov",
        }
    }
}

impl fmt::Display for RtnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RtnMode {
    type Err = RtnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "formula-phase" => Ok(RtnMode::FormulaPhase),
            "formula-resampled" => Ok(RtnMode::FormulaResampled),
            "markov" => Ok(RtnMode::Markov),
            other => Err(RtnError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtnParams {
    pub delta: f64,
    pub tau: f64,
    pub mode: RtnMode,
    pub seed: u64,
}

impl Default for RtnParams {
    fn default() -> Self {
        Self {
            delta: 0.125,
            tau: 1e-3,
            mode: RtnMode::default(),
            seed: 0,
        }
    }
}

impl RtnParams {
    pub fn validate(&self) -> Result<(), RtnError> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(RtnError::InvalidDelta(self.delta));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(RtnError::InvalidTau(self.tau));
        }
        Ok(())
    }

    /// Random stream for one trajectory.
    pub fn stream(&self, trajectory_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trajectory_index);
        rng
    }
}

/// One realised noise path on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtnTrajectory {
    pub initial_sign: f64,
    pub jumps: Vec<f64>,
    pub delta: f64,
    pub horizon: f64,
}

impl RtnTrajectory {
    /// A noise-free path.
    pub fn silent(horizon: f64) -> Self {
        Self {
            initial_sign: 1.0,
            jumps: Vec::new(),
            delta: 0.0,
            horizon,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, RtnError> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(RtnError::OutOfHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.value_at(t))
    }

    /// Value without the horizon check; right-continuous at jumps.
    pub(crate) fn value_at(&self, t: f64) -> f64 {
        let flips = self.jumps.partition_point(|&j| j <= t);
        let sign = if flips % 2 == 0 {
            self.initial_sign
        } else {
            -self.initial_sign
        };
        sign * self.delta
    }

    /// Jump times strictly inside `(0, t_end)`.
    pub fn jumps_before(&self, t_end: f64) -> &[f64] {
        let n = self.jumps.partition_point(|&j| j < t_end);
        &self.jumps[..n]
    }
}

fn sign_of(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn draw_phase<R: Rng>(rng: &mut R) -> f64 {
    let p: f64 = Open01.sample(rng);
    p.ln()
}

/// First zero of `sin(t/τ − r)` strictly after `after`.
fn next_zero(tau: f64, r: f64, after: f64) -> f64 {
    let mut k = ((after / tau - r) / PI).floor() + 1.0;
    let mut t = tau * (k * PI + r);
    while t <= after {
        k += 1.0;
        t = tau * (k * PI + r);
    }
    t
}

pub fn sample_trajectory(params: &RtnParams, horizon: f64, trajectory_index: u64) -> Result<RtnTrajectory, RtnError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(RtnError::InvalidHorizon(horizon));
    }
    params.validate()?;
    let tau = params.tau;
    let mut rng = params.stream(trajectory_index);
    let mut jumps = Vec::new();

    let initial_sign = match params.mode {
        RtnMode::FormulaPhase => {
            let r = draw_phase(&mut rng);
            let mut t = next_zero(tau, r, 0.0);
            while t < horizon {
                jumps.push(t);
                t = next_zero(tau, r, t);
            }
            sign_of((-r).sin())
        }
        RtnMode::FormulaResampled => {
            let r = draw_phase(&mut rng);
            let mut t = next_zero(tau, r, 0.0);
            while t < horizon {
                jumps.push(t);
                t = next_zero(tau, draw_phase(&mut rng), t);
            }
            sign_of((-r).sin())
        }
        RtnMode::Markov => {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let mut t = 0.0;
            loop {
                let u: f64 = Open01.sample(&mut rng);
                t += -tau * u.ln();
                if t >= horizon {
                    break;
                }
                jumps.push(t);
            }
            sign
        }
    };
    if params.delta == 0.0 {
        // flips of a zero amplitude are invisible; skip the breakpoints
        jumps.clear();
    }

    Ok(RtnTrajectory {
        initial_sign,
        jumps,
        delta: params.delta,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(tau: f64, mode: RtnMode) -> RtnParams {
        RtnParams {
            delta: 0.125,
            tau,
            mode,
            seed: 7,
        }
    }

    #[test]
    fn eval_counts_flips() {
        let mut traj = RtnTrajectory {
            initial_sign: 1.0,
            jumps: vec![],
            delta: 0.125,
            horizon: 3.0,
        };
        assert_eq!(traj.eval(0.5), Ok(0.125));
        traj.jumps = vec![1.0];
        assert_eq!(traj.eval(1.5), Ok(-0.125));
        assert_eq!(traj.eval(1.0), Ok(-0.125));
        traj.jumps = vec![1.0, 2.0];
        assert_eq!(traj.eval(2.5), Ok(0.125));
        assert_eq!(
            traj.eval(3.5),
            Err(RtnError::OutOfHorizon {
                t: 3.5,
                horizon: 3.0
            })
        );
        assert!(traj.eval(-0.1).is_err());
    }

    #[test]
    fn zero_delta_is_identically_zero() {
        for mode in [RtnMode::FormulaPhase, RtnMode::FormulaResampled, RtnMode::Markov] {
            let p = RtnParams {
                delta: 0.0,
                ..params(0.3, mode)
            };
            let traj = sample_trajectory(&p, 5.0, 3).unwrap();
            for i in 0..=100 {
                assert_eq!(traj.eval(i as f64 * 0.05).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn slow_noise_has_at_most_one_jump() {
        for idx in 0..200 {
            let traj = sample_trajectory(&params(5.0, RtnMode::FormulaPhase), 10.0, idx).unwrap();
            assert!(traj.jumps.len() <= 1, "{} jumps", traj.jumps.len());
        }
    }

    #[test]
    fn fast_noise_jump_count_matches_spacing() {
        // spacing πτ ≈ 0.157 on a unit horizon gives 6 or 7 jumps
        for idx in 0..200 {
            let traj = sample_trajectory(&params(0.05, RtnMode::FormulaPhase), 1.0, idx).unwrap();
            assert!((6..=7).contains(&traj.jumps.len()), "{} jumps", traj.jumps.len());
        }
    }

    #[test]
    fn formula_phase_spacing_is_pi_tau() {
        let tau = 0.37;
        let traj = sample_trajectory(&params(tau, RtnMode::FormulaPhase), 200.0, 11).unwrap();
        for w in traj.jumps.windows(2) {
            assert!((w[1] - w[0] - PI * tau).abs() < 1e-9);
        }
    }

    #[test]
    fn markov_mean_wait_is_tau() {
        let tau = 0.5;
        let mut waits = Vec::new();
        let mut idx = 0;
        while waits.len() < 20_000 {
            let traj = sample_trajectory(&params(tau, RtnMode::Markov), 50.0, idx).unwrap();
            let mut last = 0.0;
            for &j in &traj.jumps {
                waits.push(j - last);
                last = j;
            }
            idx += 1;
        }
        let mean = waits.iter().sum::<f64>() / waits.len() as f64;
        assert!((mean / tau - 1.0).abs() < 0.05, "mean wait {mean}");
    }

    #[test]
    fn initial_sign_follows_carrier_at_origin() {
        for idx in 0..500 {
            let p = params(1.0, RtnMode::FormulaPhase);
            let r = draw_phase(&mut p.stream(idx));
            let traj = sample_trajectory(&p, 1.0, idx).unwrap();
            assert_eq!(traj.initial_sign, sign_of((-r).sin()));
        }
    }

    #[test]
    fn streams_are_independent_of_generation_order() {
        let p = params(0.2, RtnMode::FormulaResampled);
        let forward: Vec<_> = (0..16).map(|i| sample_trajectory(&p, 4.0, i).unwrap()).collect();
        let backward: Vec<_> = (0..16).rev().map(|i| sample_trajectory(&p, 4.0, i).unwrap()).collect();
        for (i, traj) in forward.iter().enumerate() {
            assert_eq!(traj, &backward[15 - i]);
        }
        assert_ne!(forward[0], forward[1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params(1.0, RtnMode::Markov);
        assert_eq!(sample_trajectory(&p, 0.0, 0), Err(RtnError::InvalidHorizon(0.0)));
        let bad_tau = RtnParams { tau: 0.0, ..p };
        assert_eq!(sample_trajectory(&bad_tau, 1.0, 0), Err(RtnError::InvalidTau(0.0)));
        assert!("poisson".parse::<RtnMode>().is_err());
    }

    proptest! {
        #[test]
        fn trajectories_are_well_formed(
            seed in any::<u64>(),
            idx in 0u64..1000,
            tau in 0.01f64..10.0,
            mode in prop_oneof![Just(RtnMode::FormulaPhase), Just(RtnMode::FormulaResampled), Just(RtnMode::Markov)],
        ) {
            let p = RtnParams { delta: 0.125, tau, mode, seed };
            let traj = sample_trajectory(&p, 5.0, idx).unwrap();
            prop_assert!(traj.jumps.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(traj.jumps.iter().all(|&j| j > 0.0 && j < 5.0));
            for i in 0..=50 {
                let v = traj.eval(i as f64 * 0.1).unwrap();
                prop_assert!(v == 0.125 || v == -0.125);
            }
            prop_assert_eq!(&traj, &sample_trajectory(&p, 5.0, idx).unwrap());
        }
    }
}
