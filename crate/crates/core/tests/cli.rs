use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run_cli(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_qubit-rtn"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn validate_unitarity_exits_zero() {
    let dir = TempDir::new().unwrap();
    let out = run_cli(dir.path(), r#"{"experiment": "validate-unitarity", "n_trajectories": 20}"#, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/validate-unitarity.json")).unwrap()).unwrap();
    assert_eq!(sidecar["passed"], true);
    for p in sidecar["summary"]["pulses"].as_array().unwrap() {
        assert!(p["max_unitarity_defect"].as_f64().unwrap() <= 1e-6);
        assert!(p["max_oracle_deviation"].as_f64().unwrap() <= 1e-6);
    }
    let csv = fs::read_to_string(dir.path().join("out/validate-unitarity.csv")).unwrap();
    assert!(csv.starts_with("pulse,time,abs_u11,abs_u12,abs_u21,abs_u22,unitarity_defect,det_defect,oracle_deviation\n"));
}

fn format_row_time(t: f64) -> String {
    format!("{t:.2}")
}

#[test]
fn noiseless_c_sweep_peaks_at_314() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"experiment": "time-sweep", "pulses": {"x": "C"}, "rtn": {"delta": 0}, "n_trajectories": 1}"#;
    let out = run_cli(dir.path(), config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/time-sweep.csv")).unwrap();
    let row = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .find(|r| format_row_time(r[0]) == "3.14")
        .expect("row at 3.14");
    assert!(row[1] >= 0.999, "{row:?}");
}

#[test]
fn same_seed_gives_identical_csv() {
    let config = r#"{"experiment": "time-sweep", "pulses": {"x": "BP", "z": "QW"},
                     "rtn": {"tau": 0.2}, "n_trajectories": 24,
                     "time_grid": {"start": 0, "stop": 6, "step": 0.05}}"#;
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert!(run_cli(a.path(), config, &["--seed", "5", "--threads", "1"]).status.success());
    assert!(run_cli(b.path(), config, &["--seed", "5", "--threads", "2"]).status.success());
    let read = |d: &TempDir| fs::read(d.path().join("out/time-sweep.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn bad_config_reports_key_path() {
    let dir = TempDir::new().unwrap();
    let out = run_cli(dir.path(), r#"{"rtn": {"tau": -1}}"#, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rtn.tau"));
}

#[test]
fn tau_sweep_writes_csv_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"experiment": "tau-sweep", "pulses": {"x": "C"}, "gate_time": 3.2,
                     "n_trajectories": 10, "tau_grid": {"start": 0.001, "stop": 20, "points": 5}}"#;
    let out = run_cli(dir.path(), config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/tau-sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("tau,fidelity,stderr"));
    assert_eq!(csv.lines().count(), 6);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/tau-sweep.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 0);
    assert_eq!(sidecar["config"]["gate_time"], 3.2);
}
