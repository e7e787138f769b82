use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const LD: &str = r#"{"sd": {"kind": "lorentz_drude", "omega_c": 0.1}, "alpha": 0.1, "beta": 0.1}"#;

fn qbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbm")).args(args).env("QBM_WORKERS", "2").output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not a JSON record: {text}"))
}

fn trajectory_config(out_dir: &Path) -> String {
    format!(
        r#"{{"experiment": "trajectory", "output_dir": {:?},
            "state": {{"s": 2, "d": 0, "g": 1, "lambda": 1}}, "bath": {LD},
            "grid": {{"t_max": 20, "n_points": 401}}}}"#,
        out_dir.to_str().unwrap()
    )
}

#[test]
fn trajectory_writes_two_traces_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("trajectory");
    let cfg = write_config(dir.path(), "trajectory.json", &trajectory_config(&out_dir));
    let out = qbm(&["run", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["correlated.csv", "decorrelated.csv", "summary.csv", "manifest.json"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let csv = std::fs::read_to_string(out_dir.join("correlated.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,Pi,E_N,S2,Phi"));
    assert_eq!(csv.lines().count(), 402);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["experiment"], "trajectory");
    assert_eq!(manifest["config"]["mode"], "exact");
}

#[test]
fn points_and_out_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "trajectory.json", &trajectory_config(&dir.path().join("ignored")));
    let out_dir = dir.path().join("flagged");
    let out = qbm(&["run", &cfg, "--points", "101", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("ignored").exists());
    let csv = std::fs::read_to_string(out_dir.join("correlated.csv")).unwrap();
    assert_eq!(csv.lines().count(), 102);
}

#[test]
fn sweep_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"experiment": "sweep", "s": 10, "n_samples": 6, "seed": 7, "bath": {LD},
            "grid": {{"t_max": 10, "n_points": 201}}}}"#
    );
    let cfg = write_config(dir.path(), "sweep.json", &body);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(qbm(&["run", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(qbm(&["run", &cfg, "--out", b.to_str().unwrap()]).status.success());
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6 + 1 + 2);
    for name in names {
        let x = std::fs::read(a.join(&name)).unwrap();
        let y = std::fs::read(b.join(&name)).unwrap();
        assert!(x == y, "{name:?} differs between runs");
    }

    let c = dir.path().join("c");
    assert!(qbm(&["run", &cfg, "--seed", "8", "--out", c.to_str().unwrap()]).status.success());
    let x = std::fs::read(a.join("summary.csv")).unwrap();
    let z = std::fs::read(c.join("summary.csv")).unwrap();
    assert_ne!(x, z);
}

#[test]
fn constraint_violation_fails_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let cfg = write_config(dir.path(), "bad.json", &trajectory_config(&out_dir).replace("\"s\": 2", "\"s\": 0.5"));
    let out = qbm(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["kind"], "ConfigError");
    assert!(rec["message"].as_str().unwrap().contains("s = 0.5 < 1"));
    assert!(!out_dir.exists());
}

#[test]
fn validate_reports_ok_and_names_missing_seed() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.json", &trajectory_config(&dir.path().join("x")));
    let out = qbm(&["validate", &good]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "ok");

    let body = format!(r#"{{"experiment": "sweep", "s": 10, "n_samples": 6, "bath": {LD}}}"#);
    let bad = write_config(dir.path(), "noseed.json", &body);
    let out = qbm(&["validate", &bad]);
    assert!(!out.status.success());
    assert!(error_record(&out)["message"].as_str().unwrap().contains("seed"));
}

#[test]
fn unknown_keys_and_kinds_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write_config(dir.path(), "typo.json", &trajectory_config(&dir.path().join("x")).replace("\"grid\"", "\"gird\""));
    assert!(error_record(&qbm(&["validate", &typo]))["message"].as_str().unwrap().contains("gird"));
    let kind = write_config(dir.path(), "kind.json", r#"{"experiment": "fig7"}"#);
    assert_eq!(qbm(&["validate", &kind]).status.code(), Some(2));
}

#[test]
fn zero_temp_requires_vacuum_bath() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(r#"{{"experiment": "zero_temp", "g_values": [1, 2], "bath": {LD}}}"#);
    let cfg = write_config(dir.path(), "zt.json", &body);
    let out = qbm(&["validate", &cfg]);
    assert_eq!(error_record(&out)["kind"], "ConfigError");
}

#[test]
fn list_has_seven_kinds() {
    let out = qbm(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let kinds: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(
        kinds,
        ["trajectory", "zero_temp", "sweep", "entanglement_curve", "power_law", "markov_compare", "sigma_compare"]
    );
}

#[test]
fn remaining_kinds_run_on_small_grids() {
    let dir = tempfile::tempdir().unwrap();
    let grid = r#""grid": {"t_max": 20, "n_points": 401}"#;
    let exp1 = r#"{"sd": {"kind": "exponential", "epsilon": 1, "omega_c": 0.1}, "alpha": 0.1, "beta": "inf"}"#;
    let cases = [
        ("zero_temp", format!(r#"{{"experiment": "zero_temp", "g_values": [1, 2], "bath": {exp1}, {grid}}}"#), "trace_g1.csv"),
        (
            "curve",
            format!(r#"{{"experiment": "entanglement_curve", "s": 4, "d_step": 1, "bath": {LD}, "mode": "markovian", {grid}}}"#),
            "curve.csv",
        ),
        (
            "power",
            format!(r#"{{"experiment": "power_law", "s": 4, "d_step": 0.5, "baths": [{LD}, {exp1}], {grid}}}"#),
            "fits.csv",
        ),
        ("markov", format!(r#"{{"experiment": "markov_compare", "g_values": [1, 3], "bath": {LD}, {grid}}}"#), "markovian_g1.csv"),
        (
            "sigma",
            format!(r#"{{"experiment": "sigma_compare", "g_values": [1, 2], "bath": {LD}, "grid": {{"t_max": 100, "n_points": 2001}}}}"#),
            "sigma.csv",
        ),
    ];
    for (name, body, expected) in cases {
        let cfg = write_config(dir.path(), &format!("{name}.json"), &body);
        let out_dir = dir.path().join(name);
        let out = qbm(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join(expected).exists(), "{name}: {expected} missing");
        assert!(out_dir.join("manifest.json").exists());
    }
    let fits = std::fs::read_to_string(dir.path().join("power/fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 3);
}
