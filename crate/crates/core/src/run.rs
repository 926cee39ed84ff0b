//! Experiment dispatch and CSV / JSON sidecar output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{Experiment, RunConfig};
use crate::ensemble::{CurvePoint, EnsembleError};
use crate::propagator::{evolve, Drive, Method, PropagatorError};
use crate::pulse::{Axis, PulseName};
use crate::rtn::{sample_trajectory, RtnError};
use crate::sweep::{find_optimal_times, sequence_scan, tau_sweep, time_sweep, SweepError, SweepResult};

/// Unitarity, determinant and oracle-agreement tolerance of `validate-unitarity`.
pub const UNITARITY_TOL: f64 = 1e-6;

/// Local maxima at or above this fidelity are listed per scanned sequence.
pub const SEQUENCE_OPTIMUM_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Noise(#[from] RtnError),
    #[error("{pulse} trajectory {index}: {source}")]
    Propagator {
        pulse: PulseName,
        index: u64,
        #[source]
        source: PropagatorError,
    },
    #[error("missing `{0}` for this experiment")]
    Missing(&'static str),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One output table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

/// Everything a run produces, before it touches the filesystem.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub summary: Value,
    /// False when a built-in check (unitarity validation) failed.
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub sidecar: PathBuf,
    pub report: Report,
}

/// Decimal rendering rounded to 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float literal");
    if rounded == 0.0 {
        "0".to_string()
    } else {
        rounded.to_string()
    }
}

fn curve_csv(abscissa: &str, rows: &[CurvePoint]) -> String {
    let mut out = format!("{abscissa},fidelity,stderr\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_sig12(r.abscissa),
            format_sig12(r.fidelity),
            format_sig12(r.stderr)
        );
    }
    out
}

fn optima_json(result: &SweepResult, threshold: f64) -> Value {
    match find_optimal_times(&result.curve(), threshold) {
        Ok(optima) => json!(optima),
        Err(SweepError::NoOptimum { .. }) => json!([]),
        Err(e) => json!(e.to_string()),
    }
}

fn run_time_sweep(config: &RunConfig) -> Result<Report, RunError> {
    let assignment = config.pulses.ok_or(RunError::Missing("pulses"))?;
    let result = time_sweep(&assignment, &config.sweep_params(), &config.time_grid.points())?;
    Ok(Report {
        tables: vec![Table {
            name: "time-sweep".into(),
            csv: curve_csv("time", &result.rows),
        }],
        summary: json!({
            "label": result.label,
            "optima": optima_json(&result, config.threshold),
        }),
        passed: true,
    })
}

fn run_tau_sweep(config: &RunConfig) -> Result<Report, RunError> {
    let assignment = config.pulses.ok_or(RunError::Missing("pulses"))?;
    let gate_time = config.gate_time.ok_or(RunError::Missing("gate_time"))?;
    let result = tau_sweep(&assignment, gate_time, &config.tau_grid.values(), &config.sweep_params())?;
    let min = result.min_fidelity().copied();
    Ok(Report {
        tables: vec![Table {
            name: "tau-sweep".into(),
            csv: curve_csv("tau", &result.rows),
        }],
        summary: json!({
            "label": result.label,
            "gate_time": gate_time,
            "min_fidelity": min,
        }),
        passed: true,
    })
}

fn run_sequence_scan(config: &RunConfig) -> Result<Report, RunError> {
    let sequences = config.sequence_assignments()?;
    let scan = sequence_scan(
        &sequences,
        &config.sweep_params(),
        &config.time_grid.points(),
        &config.tau_grid.values(),
        SEQUENCE_OPTIMUM_THRESHOLD,
    )?;

    let mut time_csv = String::from("sequence,time,fidelity,stderr\n");
    let mut tau_csv = String::from("sequence,optimal_time,tau,fidelity,stderr\n");
    let mut summary = Vec::new();
    for e in &scan.entries {
        for r in &e.time_curve.rows {
            let _ = writeln!(
                time_csv,
                "{},{},{},{}",
                e.label,
                format_sig12(r.abscissa),
                format_sig12(r.fidelity),
                format_sig12(r.stderr)
            );
        }
        for r in &e.tau_curve.rows {
            let _ = writeln!(
                tau_csv,
                "{},{},{},{},{}",
                e.label,
                format_sig12(e.principal.time),
                format_sig12(r.abscissa),
                format_sig12(r.fidelity),
                format_sig12(r.stderr)
            );
        }
        summary.push(json!({
            "sequence": e.label,
            "principal_optimum": e.principal,
            "optima": e.optima,
            "min_fidelity_over_tau": e.tau_curve.min_fidelity(),
        }));
    }
    Ok(Report {
        tables: vec![
            Table {
                name: "sequence-scan".into(),
                csv: tau_csv,
            },
            Table {
                name: "sequence-scan-time".into(),
                csv: time_csv,
            },
        ],
        summary: json!({ "optimum_threshold": scan.threshold, "sequences": summary }),
        passed: true,
    })
}

/// Per-time defects of one pulse, maximised over trajectories.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Defects {
    unitarity: f64,
    det: f64,
    oracle: f64,
}

impl Defects {
    fn max(self, other: Defects) -> Defects {
        Defects {
            unitarity: self.unitarity.max(other.unitarity),
            det: self.det.max(other.det),
            oracle: self.oracle.max(other.oracle),
        }
    }
}

fn run_validate_unitarity(config: &RunConfig) -> Result<Report, RunError> {
    let grid = config.time_grid.points();
    let horizon = grid.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let rtn = config.rtn_params();
    let method = Method::Disentangle {
        substep: config.substep,
    };

    let mut csv = String::from("pulse,time,abs_u11,abs_u12,abs_u21,abs_u22,unitarity_defect,det_defect,oracle_deviation\n");
    let mut summary = Vec::new();
    let mut passed = true;
    for name in PulseName::ALL {
        let pulses = [name.on(Axis::X)];
        let per_trajectory = (0..config.n_trajectories as u64)
            .into_par_iter()
            .map(|index| {
                let noise = sample_trajectory(&rtn, horizon, index)?;
                let drive = Drive::new(&pulses, Some(&noise));
                let wrap = |source| RunError::Propagator {
                    pulse: name,
                    index,
                    source,
                };
                let d = evolve(&drive, method, &grid).map_err(wrap)?;
                let e = evolve(&drive, Method::Exact, &grid).map_err(wrap)?;
                Ok((d, e))
            })
            .collect::<Result<Vec<_>, RunError>>()?;

        let mut worst_overall = Defects::default();
        for (i, &t) in grid.iter().enumerate() {
            let worst = per_trajectory
                .iter()
                .map(|(d, e)| {
                    let (ud, ue) = (d[i], e[i]);
                    Defects {
                        unitarity: ud.unitarity_defect().max(ue.unitarity_defect()),
                        det: ud.det_defect().max(ue.det_defect()),
                        oracle: ud.max_abs_diff(&ue),
                    }
                })
                .fold(Defects::default(), Defects::max);
            worst_overall = worst_overall.max(worst);
            let u = per_trajectory[0].0[i];
            let _ = writeln!(
                csv,
                "{name},{},{},{},{},{},{},{},{}",
                format_sig12(t),
                format_sig12(u.u11().norm()),
                format_sig12(u.u12().norm()),
                format_sig12(u.u21().norm()),
                format_sig12(u.u22().norm()),
                format_sig12(worst.unitarity),
                format_sig12(worst.det),
                format_sig12(worst.oracle)
            );
        }
        let ok = worst_overall.unitarity <= UNITARITY_TOL
            && worst_overall.det <= UNITARITY_TOL
            && worst_overall.oracle <= UNITARITY_TOL;
        passed &= ok;
        summary.push(json!({
            "pulse": name.as_str(),
            "max_unitarity_defect": worst_overall.unitarity,
            "max_det_defect": worst_overall.det,
            "max_oracle_deviation": worst_overall.oracle,
            "passed": ok,
        }));
    }
    Ok(Report {
        tables: vec![Table {
            name: "validate-unitarity".into(),
            csv,
        }],
        summary: json!({ "tolerance": UNITARITY_TOL, "pulses": summary }),
        passed,
    })
}

/// Runs the experiment without writing anything.
pub fn execute(config: &RunConfig) -> Result<Report, RunError> {
    match config.experiment {
        Experiment::TimeSweep => run_time_sweep(config),
        Experiment::TauSweep => run_tau_sweep(config),
        Experiment::SequenceScan => run_sequence_scan(config),
        Experiment::ValidateUnitarity => run_validate_unitarity(config),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the experiment and writes `<name>.csv` tables plus `<experiment>.json`
/// into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let report = execute(config)?;
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for table in &report.tables {
        let path = out_dir.join(format!("{}.csv", table.name));
        write(&path, &table.csv)?;
        files.push(path);
    }
    let sidecar = out_dir.join(format!("{}.json", config.experiment.as_str()));
    let doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "config": config,
        "outputs": report.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>(),
        "passed": report.passed,
        "summary": report.summary,
    });
    write(&sidecar, &serde_json::to_string_pretty(&doc).expect("sidecar serialises"))?;
    Ok(RunOutcome {
        files,
        sidecar,
        report,
    })
}
