//! Spin-flip gate fidelity of a single qubit driven by square-wave control
//! pulses under random telegraph noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`pulse`]: the C, QW and BP square-wave drives.
//! * [`rtn`]: reproducible random telegraph noise paths.
//! * [`propagator`]: single-trajectory evolution, by disentangling ODEs and
//!   by an exact piecewise-constant product.
//! * [`ensemble`]: noise averaging and fidelity.
//! * [`sweep`]: time and correlation-time sweeps, optimal times, and the
//!   axis-permutation scan.
//! * [`config`] and [`run`]: JSON run configurations and CSV/JSON output.

pub mod config;
pub mod ensemble;
pub mod matrix;
pub mod propagator;
pub mod pulse;
pub mod rtn;
pub mod run;
pub mod sweep;

pub use ensemble::{fidelity, fidelity_curve, CurvePoint, DensityMatrix2, EnsembleConfig, FidelityCurve, GateTarget};
pub use propagator::{assemble_unitary, propagate_disentangled, propagate_exact, DisentangleState, Drive, Unitary2};
pub use pulse::{Axis, Family, PulseName, PulseSpec};
pub use rtn::{sample_trajectory, RtnMode, RtnParams, RtnTrajectory};
pub use sweep::{find_optimal_times, sequence_scan, tau_sweep, time_sweep, AxisAssignment, SweepParams, SweepResult};
