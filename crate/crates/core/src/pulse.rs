//! Square-wave control pulses.
//!
//! Every pulse is the sign of a trigonometric carrier, scaled by an amplitude:
//!
//! * `Cosine`: `a(t) = A · sgn(cos(t / t0))`
//! * `Sine`:   `a(t) = A · sgn(sin(t / t0 + r0))`
//!
//! The three named presets are the constant pulse (C), the quantum-well
//! pulse (QW) and the barrier-potential pulse (BP). `sgn(0)` is taken as `+1`
//! so the waveform is right-continuous.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PulseError {
    #[error("pulse t0 must be positive and finite, got {0}")]
    InvalidT0(f64),
    #[error("pulse amplitude must be non-negative and finite, got {0}")]
    InvalidAmplitude(f64),
    #[error("pulse r0 must be finite, got {0}")]
    InvalidPhase(f64),
    #[error("unknown pulse name `{0}` (expected C, QW or BP)")]
    UnknownName(String),
    #[error("unknown axis `{0}` (expected x, y or z)")]
    UnknownAxis(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cosine,
    Sine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = PulseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(PulseError::UnknownAxis(other.to_string())),
        }
    }
}

/// The named pulse presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PulseName {
    C,
    QW,
    BP,
}

impl PulseName {
    pub const ALL: [PulseName; 3] = [PulseName::C, PulseName::QW, PulseName::BP];

    /// `(family, t0, r0)` of the preset.
    pub const fn shape(self) -> (Family, f64, f64) {
        match self {
            PulseName::C => (Family::Cosine, 8.0, 0.0),
            PulseName::BP => (Family::Sine, 1.8, -0.6),
            PulseName::QW => (Family::Sine, 2.0, 2.56),
        }
    }

    /// The preset with unit amplitude on `axis`.
    pub fn on(self, axis: Axis) -> PulseSpec {
        let (family, t0, r0) = self.shape();
        PulseSpec {
            family,
            t0,
            r0,
            amplitude: 1.0,
            axis,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PulseName::C => "C",
            PulseName::QW => "QW",
            PulseName::BP => "BP",
        }
    }
}

impl fmt::Display for PulseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PulseName {
    type Err = PulseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "C" => Ok(PulseName::C),
            "QW" => Ok(PulseName::QW),
            "BP" => Ok(PulseName::BP),
            other => Err(PulseError::UnknownName(other.to_string())),
        }
    }
}

/// One square-wave drive channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub family: Family,
    pub t0: f64,
    pub r0: f64,
    pub amplitude: f64,
    pub axis: Axis,
}

impl PulseSpec {
    pub fn new(family: Family, t0: f64, r0: f64, amplitude: f64, axis: Axis) -> Result<Self, PulseError> {
        let spec = Self {
            family,
            t0,
            r0,
            amplitude,
            axis,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PulseError> {
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return Err(PulseError::InvalidT0(self.t0));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(PulseError::InvalidAmplitude(self.amplitude));
        }
        if !self.r0.is_finite() {
            return Err(PulseError::InvalidPhase(self.r0));
        }
        Ok(())
    }

    /// Carrier phase written as the argument of a sine, so that zeros sit at
    /// integer multiples of π for both families.
    fn sine_phase(&self, t: f64) -> f64 {
        match self.family {
            Family::Sine => t / self.t0 + self.r0,
            Family::Cosine => t / self.t0 + self.r0 + FRAC_PI_2,
        }
    }

    /// Pulse amplitude at time `t`; always `±amplitude`.
    pub fn eval(&self, t: f64) -> f64 {
        let carrier = match self.family {
            Family::Cosine => (t / self.t0 + self.r0).cos(),
            Family::Sine => (t / self.t0 + self.r0).sin(),
        };
        if carrier >= 0.0 {
            self.amplitude
        } else {
            -self.amplitude
        }
    }

    /// All sign switches in the open interval `(0, t_end)`, increasing.
    ///
    /// Computed in closed form: the carrier vanishes at `t = t0 (kπ − φ0)`
    /// where `φ0` is the sine-phase at `t = 0`.
    pub fn jump_times(&self, t_end: f64) -> Vec<f64> {
        let phi0 = self.sine_phase(0.0);
        let mut k = (phi0 / PI).floor() + 1.0;
        let mut out = Vec::new();
        loop {
            let t = self.t0 * (k * PI - phi0);
            if t >= t_end {
                break;
            }
            if t > 0.0 {
                out.push(t);
            }
            k += 1.0;
        }
        out
    }
}

fn unit_amplitude() -> f64 {
    1.0
}

/// A pulse shape without an axis, as written in run configurations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseShape {
    pub family: Family,
    pub t0: f64,
    #[serde(default)]
    pub r0: f64,
    #[serde(default = "unit_amplitude")]
    pub amplitude: f64,
}

/// A named preset or a custom shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PulseChoice {
    Named(PulseName),
    Custom(PulseShape),
}

impl PulseChoice {
    pub fn name(&self) -> Option<PulseName> {
        match self {
            PulseChoice::Named(n) => Some(*n),
            PulseChoice::Custom(_) => None,
        }
    }

    pub fn on(&self, axis: Axis) -> PulseSpec {
        match *self {
            PulseChoice::Named(n) => n.on(axis),
            PulseChoice::Custom(s) => PulseSpec {
                family: s.family,
                t0: s.t0,
                r0: s.r0,
                amplitude: s.amplitude,
                axis,
            },
        }
    }

    pub fn validate(&self) -> Result<(), PulseError> {
        self.on(Axis::X).validate()
    }

    pub fn label(&self) -> String {
        match self {
            PulseChoice::Named(n) => n.to_string(),
            PulseChoice::Custom(_) => "custom".to_string(),
        }
    }
}

impl From<PulseName> for PulseChoice {
    fn from(n: PulseName) -> Self {
        PulseChoice::Named(n)
    }
}
