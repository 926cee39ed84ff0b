//! Single-trajectory time evolution of the driven qubit.
//!
//! The Hamiltonian (ħ = 1) is
//!
//! ```text
//! H(t) = ½ [a_x σx + a_y σy + (a_z + η_z) σz]
//!      = H₊ s₊ + H₋ s₋ + H_z s_z,
//! H₊ = ½(a_x − i a_y),  H₋ = ½(a_x + i a_y),  H_z = a_z + η_z,
//! ```
//!
//! with `s± = (σx ± iσy)/2` and `s_z = σz/2`. Two independent routes compute
//! the time-ordered propagator:
//!
//! * **Disentangling.** `U = exp(α s₊) exp(β s_z) exp(γ s₋)` where
//!
//!   ```text
//!   α' = −i [H₊ + H_z α − H₋ α²]
//!   β' = −i [H_z − 2 H₋ α]
//!   γ' = −i H₋ e^β
//!   ```
//!
//!   integrated with classical RK4 from `(0, 0, 0)`.
//! * **Exact.** The drive is piecewise constant, so the propagator is an
//!   ordered product of closed-form SU(2) rotations.
//!
//! The disentangling coordinates are a chart of SU(2) that is singular where
//! `u22 = 0`, i.e. at every complete spin flip, where α has a pole on the real
//! time axis. The integrator therefore re-anchors: once `|α|` or `|γ|` leaves
//! the unit disc, the local factor is folded into an accumulated matrix and
//! the coordinates restart from zero. Each local factor is still the
//! disentangled propagator of its own sub-interval.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Mat2;
use crate::pulse::{Axis, PulseSpec};
use crate::rtn::RtnTrajectory;

/// |Re β| beyond which the disentangled form is considered singular.
pub const BETA_GUARD: f64 = 200.0;

/// Chart radius for α and γ before the integrator re-anchors.
const CHART_LIMIT: f64 = 1.0;

/// Default RK4 substep between breakpoints.
pub const DEFAULT_SUBSTEP: f64 = 1e-3;

/// Tolerance for `propagator = both`.
pub const CROSS_CHECK_TOL: f64 = 1e-6;

const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

#[derive(Debug, Error, PartialEq)]
pub enum PropagatorError {
    #[error("disentangling coordinates singular at t = {t} (|Re beta| = {re_beta:.3e} > {BETA_GUARD})")]
    OverflowGuard { t: f64, re_beta: f64 },
    #[error("non-finite disentangling state at t = {0}")]
    NonFinite(f64),
    #[error("substep must be positive and finite, got {0}")]
    InvalidSubstep(f64),
    #[error("time {t} outside the noise horizon {horizon}")]
    BeyondNoiseHorizon { t: f64, horizon: f64 },
    #[error("invalid time {0}: sample times must be finite, non-negative and non-decreasing")]
    InvalidTime(f64),
    #[error("propagators disagree by {deviation:.3e} at t = {t}")]
    Divergence { t: f64, deviation: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagatorKind {
    #[default]
    Disentangle,
    Exact,
    Both,
}

/// Instantaneous control and noise amplitudes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DriveSample {
    pub a_x: f64,
    pub a_y: f64,
    pub a_z: f64,
    pub eta_z: f64,
}

impl DriveSample {
    /// Effective field `b` such that `H = ½ b·σ`.
    pub fn field(&self) -> [f64; 3] {
        [self.a_x, self.a_y, self.a_z + self.eta_z]
    }

    pub fn is_finite(&self) -> bool {
        self.field().iter().all(|x| x.is_finite())
    }
}

/// Control pulses plus an optional z-noise path.
#[derive(Clone, Copy, Debug)]
pub struct Drive<'a> {
    pub pulses: &'a [PulseSpec],
    pub noise: Option<&'a RtnTrajectory>,
}

impl<'a> Drive<'a> {
    pub fn new(pulses: &'a [PulseSpec], noise: Option<&'a RtnTrajectory>) -> Self {
        Self { pulses, noise }
    }

    pub fn noiseless(pulses: &'a [PulseSpec]) -> Self {
        Self { pulses, noise: None }
    }

    pub fn sample(&self, t: f64) -> DriveSample {
        let mut a = [0.0; 3];
        for p in self.pulses {
            a[p.axis.index()] += p.eval(t);
        }
        DriveSample {
            a_x: a[Axis::X.index()],
            a_y: a[Axis::Y.index()],
            a_z: a[Axis::Z.index()],
            eta_z: self.noise.map_or(0.0, |n| n.value_at(t)),
        }
    }

    /// Every discontinuity of the drive strictly inside `(t_start, t_end)`,
    /// sorted and deduplicated.
    pub fn breakpoints(&self, t_start: f64, t_end: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.pulses.iter().flat_map(|p| p.jump_times(t_end)).collect();
        if let Some(noise) = self.noise {
            out.extend_from_slice(noise.jumps_before(t_end));
        }
        out.retain(|&t| t > t_start && t < t_end);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn check_horizon(&self, t_end: f64) -> Result<(), PropagatorError> {
        match self.noise {
            Some(n) if t_end > n.horizon => Err(PropagatorError::BeyondNoiseHorizon {
                t: t_end,
                horizon: n.horizon,
            }),
            _ => Ok(()),
        }
    }
}

/// Coordinates of the disentangled propagator at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisentangleState {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub t: f64,
}

impl DisentangleState {
    pub fn origin(t: f64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            alpha: zero,
            beta: zero,
            gamma: zero,
            t,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.alpha, self.beta, self.gamma]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn chart_radius(&self) -> f64 {
        self.alpha.norm().max(self.gamma.norm())
    }

    fn check(&self) -> Result<(), PropagatorError> {
        if !self.is_finite() {
            return Err(PropagatorError::NonFinite(self.t));
        }
        if self.beta.re.abs() > BETA_GUARD {
            return Err(PropagatorError::OverflowGuard {
                t: self.t,
                re_beta: self.beta.re.abs(),
            });
        }
        Ok(())
    }

    /// Chart coordinates of an SU(2) matrix; fails where `u22` vanishes.
    pub fn from_unitary(u: &Unitary2, t: f64) -> Result<Self, PropagatorError> {
        let u22 = u.u22();
        let beta = -2.0 * u22.ln();
        if !(beta.re.is_finite() && beta.re.abs() <= BETA_GUARD) {
            return Err(PropagatorError::OverflowGuard {
                t,
                re_beta: beta.re.abs(),
            });
        }
        Ok(Self {
            alpha: u.u12() / u22,
            beta,
            gamma: u.u21() / u22,
            t,
        })
    }
}

/// Time derivatives of `(α, β, γ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisentangleRates {
    pub d_alpha: Complex64,
    pub d_beta: Complex64,
    pub d_gamma: Complex64,
}

pub fn riccati_rhs(state: &DisentangleState, drive: &DriveSample) -> DisentangleRates {
    let h_plus = Complex64::new(0.5 * drive.a_x, -0.5 * drive.a_y);
    let h_minus = Complex64::new(0.5 * drive.a_x, 0.5 * drive.a_y);
    let h_z = drive.a_z + drive.eta_z;
    let a = state.alpha;
    DisentangleRates {
        d_alpha: MINUS_I * (h_plus + h_z * a - h_minus * a * a),
        d_beta: MINUS_I * (h_z - 2.0 * h_minus * a),
        d_gamma: MINUS_I * h_minus * state.beta.exp(),
    }
}

fn rk4_step(state: &DisentangleState, drive: &DriveSample, h: f64) -> DisentangleState {
    let shifted = |k: &DisentangleRates, scale: f64| DisentangleState {
        alpha: state.alpha + k.d_alpha * scale,
        beta: state.beta + k.d_beta * scale,
        gamma: state.gamma + k.d_gamma * scale,
        t: state.t,
    };
    let k1 = riccati_rhs(state, drive);
    let k2 = riccati_rhs(&shifted(&k1, 0.5 * h), drive);
    let k3 = riccati_rhs(&shifted(&k2, 0.5 * h), drive);
    let k4 = riccati_rhs(&shifted(&k3, h), drive);
    let w = h / 6.0;
    DisentangleState {
        alpha: state.alpha + (k1.d_alpha + 2.0 * k2.d_alpha + 2.0 * k3.d_alpha + k4.d_alpha) * w,
        beta: state.beta + (k1.d_beta + 2.0 * k2.d_beta + 2.0 * k3.d_beta + k4.d_beta) * w,
        gamma: state.gamma + (k1.d_gamma + 2.0 * k2.d_gamma + 2.0 * k3.d_gamma + k4.d_gamma) * w,
        t: state.t + h,
    }
}

/// A 2×2 evolution operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary2(pub Mat2);

impl Unitary2 {
    pub fn identity() -> Self {
        Self(Mat2::identity())
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn u11(&self) -> Complex64 {
        self.0.m[0][0]
    }

    pub fn u12(&self) -> Complex64 {
        self.0.m[0][1]
    }

    pub fn u21(&self) -> Complex64 {
        self.0.m[1][0]
    }

    pub fn u22(&self) -> Complex64 {
        self.0.m[1][1]
    }

    /// ‖U†U − I‖ in the entrywise max norm.
    pub fn unitarity_defect(&self) -> f64 {
        (self.0.dagger() * self.0).max_abs_diff(&Mat2::identity())
    }

    pub fn det_defect(&self) -> f64 {
        (self.0.det() - 1.0).norm()
    }

    /// Probability of the `|0⟩ → |1⟩` transfer, `|u12|²`.
    pub fn flip_probability(&self) -> f64 {
        self.u12().norm_sqr()
    }

    pub fn max_abs_diff(&self, other: &Unitary2) -> f64 {
        self.0.max_abs_diff(&other.0)
    }
}

impl std::ops::Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        Unitary2(self.0 * rhs.0)
    }
}

/// `U = [[e^{β/2} + αγ e^{−β/2}, α e^{−β/2}], [γ e^{−β/2}, e^{−β/2}]]`.
pub fn assemble_unitary(state: &DisentangleState) -> Result<Unitary2, PropagatorError> {
    state.check()?;
    let half = 0.5 * state.beta;
    let up = half.exp();
    let down = (-half).exp();
    Ok(Unitary2(Mat2::new(
        up + state.alpha * state.gamma * down,
        state.alpha * down,
        state.gamma * down,
        down,
    )))
}

/// How the propagator advances across a constant-drive segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Disentangle { substep: f64 },
    Exact,
}

impl Method {
    fn validate(&self) -> Result<(), PropagatorError> {
        match *self {
            Method::Disentangle { substep } if !(substep.is_finite() && substep > 0.0) => {
                Err(PropagatorError::InvalidSubstep(substep))
            }
            _ => Ok(()),
        }
    }
}

/// Running state of one propagation.
struct Walker {
    method: Method,
    /// Product of all finished factors (exact route: the whole propagator).
    anchor: Mat2,
    /// Open disentangling chart, relative to `anchor`.
    local: DisentangleState,
    reanchored: bool,
}

impl Walker {
    fn new(method: Method, t_start: f64) -> Self {
        Self {
            method,
            anchor: Mat2::identity(),
            local: DisentangleState::origin(t_start),
            reanchored: false,
        }
    }

    fn advance(&mut self, drive: &DriveSample, t_from: f64, t_to: f64) -> Result<(), PropagatorError> {
        let len = t_to - t_from;
        match self.method {
            Method::Exact => {
                self.anchor = Mat2::rotation(drive.field(), len) * self.anchor;
            }
            Method::Disentangle { substep } => {
                let steps = (len / substep).ceil().max(1.0) as usize;
                let h = len / steps as f64;
                for _ in 0..steps {
                    let next = rk4_step(&self.local, drive, h);
                    next.check()?;
                    self.local = next;
                    if self.local.chart_radius() > CHART_LIMIT {
                        self.fold()?;
                    }
                }
                self.local.t = t_to;
            }
        }
        Ok(())
    }

    fn fold(&mut self) -> Result<(), PropagatorError> {
        let factor = assemble_unitary(&self.local)?;
        self.anchor = factor.0 * self.anchor;
        self.local = DisentangleState::origin(self.local.t);
        self.reanchored = true;
        Ok(())
    }

    fn current(&self) -> Result<Unitary2, PropagatorError> {
        match self.method {
            Method::Exact => Ok(Unitary2(self.anchor)),
            Method::Disentangle { .. } => {
                let local = assemble_unitary(&self.local)?;
                let total = local.0 * self.anchor;
                if !total.is_finite() {
                    return Err(PropagatorError::NonFinite(self.local.t));
                }
                Ok(Unitary2(total))
            }
        }
    }
}

/// Propagator from `t_start` to each of `times` (non-decreasing, ≥ `t_start`).
pub fn evolve_from(
    drive: &Drive<'_>,
    method: Method,
    t_start: f64,
    times: &[f64],
) -> Result<Vec<Unitary2>, PropagatorError> {
    method.validate()?;
    let mut last = t_start;
    if !(t_start.is_finite() && t_start >= 0.0) {
        return Err(PropagatorError::InvalidTime(t_start));
    }
    for &t in times {
        if !(t.is_finite() && t >= last) {
            return Err(PropagatorError::InvalidTime(t));
        }
        last = t;
    }
    let t_end = last;
    drive.check_horizon(t_end)?;

    let breaks = drive.breakpoints(t_start, t_end);
    let mut walker = Walker::new(method, t_start);
    let mut out = Vec::with_capacity(times.len());
    let mut now = t_start;
    let mut b = 0;
    for &target in times {
        while now < target {
            let next = if b < breaks.len() && breaks[b] < target {
                b += 1;
                breaks[b - 1]
            } else {
                target
            };
            if next > now {
                let sample = drive.sample(0.5 * (now + next));
                walker.advance(&sample, now, next)?;
                now = next;
            }
        }
        out.push(walker.current()?);
    }
    Ok(out)
}

/// Propagator from 0 to each of `times`.
pub fn evolve(drive: &Drive<'_>, method: Method, times: &[f64]) -> Result<Vec<Unitary2>, PropagatorError> {
    evolve_from(drive, method, 0.0, times)
}

/// Disentangling route from 0 to `t_end`, returned in chart coordinates.
pub fn propagate_disentangled(drive: &Drive<'_>, t_end: f64, substep: f64) -> Result<DisentangleState, PropagatorError> {
    let method = Method::Disentangle { substep };
    method.validate()?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(PropagatorError::InvalidTime(t_end));
    }
    drive.check_horizon(t_end)?;

    let breaks = drive.breakpoints(0.0, t_end);
    let mut walker = Walker::new(method, 0.0);
    let mut now = 0.0;
    for next in breaks.into_iter().chain(std::iter::once(t_end)) {
        if next > now {
            walker.advance(&drive.sample(0.5 * (now + next)), now, next)?;
            now = next;
        }
    }
    if walker.reanchored {
        DisentangleState::from_unitary(&walker.current()?, t_end)
    } else {
        Ok(walker.local)
    }
}

/// Ordered product of closed-form rotations from 0 to `t_end`.
pub fn propagate_exact(drive: &Drive<'_>, t_end: f64) -> Result<Unitary2, PropagatorError> {
    propagate_exact_between(drive, 0.0, t_end)
}

pub fn propagate_exact_between(drive: &Drive<'_>, t_start: f64, t_end: f64) -> Result<Unitary2, PropagatorError> {
    let mut v = evolve_from(drive, Method::Exact, t_start, &[t_end])?;
    Ok(v.pop().expect("one sample requested"))
}

/// Propagators at `times` via the requested route(s).
pub fn evolve_with(
    drive: &Drive<'_>,
    kind: PropagatorKind,
    substep: f64,
    times: &[f64],
) -> Result<Vec<Unitary2>, PropagatorError> {
    let disentangled = |drive: &Drive<'_>| match evolve(drive, Method::Disentangle { substep }, times) {
        Err(PropagatorError::OverflowGuard { .. }) => evolve(drive, Method::Exact, times),
        other => other,
    };
    match kind {
        PropagatorKind::Exact => evolve(drive, Method::Exact, times),
        PropagatorKind::Disentangle => disentangled(drive),
        PropagatorKind::Both => {
            let d = disentangled(drive)?;
            let e = evolve(drive, Method::Exact, times)?;
            for ((ud, ue), &t) in d.iter().zip(&e).zip(times) {
                let deviation = ud.max_abs_diff(ue);
                if deviation > CROSS_CHECK_TOL {
                    return Err(PropagatorError::Divergence { t, deviation });
                }
            }
            Ok(d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::PulseName;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rhs_examples() {
        let origin = DisentangleState::origin(0.0);
        let x_drive = DriveSample {
            a_x: 1.0,
            ..Default::default()
        };
        let r = riccati_rhs(&origin, &x_drive);
        assert_eq!(r.d_alpha, c(0.0, -0.5));
        assert_eq!(r.d_beta, c(0.0, 0.0));
        assert_eq!(r.d_gamma, c(0.0, -0.5));

        let r = riccati_rhs(&origin, &DriveSample::default());
        assert_eq!((r.d_alpha, r.d_beta, r.d_gamma), (c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)));

        let state = DisentangleState {
            alpha: c(1.0, 0.0),
            ..origin
        };
        let z_drive = DriveSample {
            a_z: 1.0,
            ..Default::default()
        };
        let r = riccati_rhs(&state, &z_drive);
        assert_eq!(r.d_alpha, c(0.0, -1.0));
        assert_eq!(r.d_beta, c(0.0, -1.0));
        assert_eq!(r.d_gamma, c(0.0, 0.0));
    }

    #[test]
    fn rhs_matches_derivative_of_oracle() {
        // Along the exact solution the chart coordinates must satisfy the ODEs:
        // compare central finite differences of from_unitary(exact U) with rhs.
        let pulses = [PulseName::C.on(Axis::X), PulseName::BP.on(Axis::Y)];
        let drive = Drive::noiseless(&pulses);
        let t = 0.7;
        let h = 1e-5;
        let state = |t| DisentangleState::from_unitary(&propagate_exact(&drive, t).unwrap(), t).unwrap();
        let (lo, mid, hi) = (state(t - h), state(t), state(t + h));
        let rates = riccati_rhs(&mid, &drive.sample(t));
        assert!(((hi.alpha - lo.alpha) / (2.0 * h) - rates.d_alpha).norm() < 1e-7);
        assert!(((hi.beta - lo.beta) / (2.0 * h) - rates.d_beta).norm() < 1e-7);
        assert!(((hi.gamma - lo.gamma) / (2.0 * h) - rates.d_gamma).norm() < 1e-7);
    }

    #[test]
    fn assemble_examples() {
        let id = assemble_unitary(&DisentangleState::origin(0.0)).unwrap();
        assert_eq!(id, Unitary2::identity());

        let s = DisentangleState {
            beta: c(0.0, PI),
            ..DisentangleState::origin(0.0)
        };
        let u = assemble_unitary(&s).unwrap();
        assert!(u.max_abs_diff(&Unitary2(Mat2::new(c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)))) < 1e-15);

        let s = DisentangleState {
            alpha: c(0.3, -1.2),
            beta: c(-0.4, 2.0),
            gamma: c(-0.8, 0.1),
            t: 0.0,
        };
        assert!(assemble_unitary(&s).unwrap().det_defect() < 1e-12);

        let s = DisentangleState {
            beta: c(201.0, 0.0),
            ..DisentangleState::origin(1.0)
        };
        assert!(matches!(assemble_unitary(&s), Err(PropagatorError::OverflowGuard { .. })));
    }

    #[test]
    fn no_drive_stays_at_origin() {
        let drive = Drive::noiseless(&[]);
        let s = propagate_disentangled(&drive, 3.7, DEFAULT_SUBSTEP).unwrap();
        assert_eq!((s.alpha, s.beta, s.gamma), (c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)));
        assert_eq!(propagate_exact(&drive, 3.7).unwrap(), Unitary2::identity());
    }

    #[test]
    fn constant_x_drive_flips_and_half_flips() {
        let pulses = [PulseName::C.on(Axis::X)];
        let drive = Drive::noiseless(&pulses);
        assert!((propagate_exact(&drive, PI).unwrap().u21().norm_sqr() - 1.0).abs() < 1e-12);
        assert!((propagate_exact(&drive, PI / 2.0).unwrap().u21().norm_sqr() - 0.5).abs() < 1e-12);

        let s = propagate_disentangled(&drive, PI, DEFAULT_SUBSTEP).unwrap();
        let u = assemble_unitary(&s).unwrap();
        assert!((u.u21().norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bp_noiseless_flip_near_quoted_time() {
        let pulses = [PulseName::BP.on(Axis::X)];
        let u = propagate_exact(&Drive::noiseless(&pulses), 8.20).unwrap();
        assert!(u.u21().norm_sqr() >= 0.999);
    }

    #[test]
    fn rejects_bad_arguments() {
        let drive = Drive::noiseless(&[]);
        assert_eq!(
            propagate_disentangled(&drive, 1.0, 0.0),
            Err(PropagatorError::InvalidSubstep(0.0))
        );
        let noise = RtnTrajectory::silent(2.0);
        let noisy = Drive::new(&[], Some(&noise));
        assert!(matches!(
            propagate_exact(&noisy, 3.0),
            Err(PropagatorError::BeyondNoiseHorizon { .. })
        ));
        assert!(matches!(
            evolve(&drive, Method::Exact, &[1.0, 0.5]),
            Err(PropagatorError::InvalidTime(_))
        ));
    }

    #[test]
    fn from_unitary_round_trips_chart() {
        let s = DisentangleState {
            alpha: c(0.2, 0.5),
            beta: c(0.3, -1.0),
            gamma: c(-0.6, 0.4),
            t: 0.0,
        };
        let back = DisentangleState::from_unitary(&assemble_unitary(&s).unwrap(), 0.0).unwrap();
        assert!((back.alpha - s.alpha).norm() < 1e-14);
        assert!((back.beta - s.beta).norm() < 1e-14);
        assert!((back.gamma - s.gamma).norm() < 1e-14);
    }
}
