//! End-to-end runs of the binary: smoke paths, exit codes and output files.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfrbsde"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const INSURANCE: &str = r#"{
    "seed": 11,
    "grid": {"horizon": 1.0, "steps": 60},
    "forward": {"kind": "geometric_bm", "x0": 1.0, "vol": 0.2},
    "problem": {"builtin": "insurance"},
    "scheme": {"kind": "both"},
    "engine": {"kind": "lattice"},
    "output": {"plotdata": true}
}"#;

#[test]
fn insurance_both_schemes_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "insurance.json", INSURANCE);
    let out = dir.path().join("results");
    let status = bin()
        .args(["solve", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    for scheme in ["snell", "penalty"] {
        let csv = fs::read_to_string(out.join(scheme).join("timeseries.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,mean_Y,std_Y,mean_K,mean_Z,constraint_violation"
        );
        assert_eq!(lines.count(), 61);
        // cumulative K column is sorted
        let ks: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
            .collect();
        assert!(ks.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.join(scheme).join("plotdata.csv").exists());
    }

    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    let arr = diag.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    for doc in arr {
        assert_eq!(doc["schema_version"], 1);
        assert!(doc["gamma_condition_value"].as_f64().unwrap() < 1.0);
        assert!(doc["skorohod_residual"].as_f64().unwrap() <= 1e-9);
        assert!(doc["cross_scheme_distance"].as_f64().unwrap() <= 1e-3);
    }
}

#[test]
fn infeasible_constants_exit_2_and_force_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "infeasible.json",
        r#"{
            "grid": {"horizon": 1.0, "steps": 20},
            "forward": {"kind": "brownian", "x0": 0.0},
            "problem": {
                "builtin": "custom",
                "driver": {"const": 0.0},
                "obstacle": {"add": [
                    {"mul": [{"const": 0.5}, {"var": "y"}]},
                    {"mul": [{"const": 0.5}, {"var": "m"}]},
                    {"const": -5.0}
                ]},
                "terminal": {"var": "x"},
                "gamma1": 0.5,
                "gamma2": 0.5
            }
        }"#,
    );
    let out = dir.path().join("results");
    let output = bin()
        .args(["solve", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("gamma"), "stderr: {stderr}");

    // the barrier sits far below the solution, so the forced run converges
    let status = bin()
        .args(["solve", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&out)
        .arg("--force")
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn missing_terminal_exit_4_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "broken.json",
        r#"{
            "grid": {"horizon": 1.0, "steps": 10},
            "forward": {"kind": "brownian", "x0": 0.0},
            "problem": {"builtin": "custom",
                        "driver": {"const": 0.0},
                        "obstacle": {"const": -100.0}}
        }"#,
    );
    let output = bin().args(["solve", "--config"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&output.stderr).contains("problem.terminal"));
}

#[test]
fn unreadable_config_exit_4() {
    let output = bin()
        .args(["solve", "--config", "/nonexistent/nowhere.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn american_put_mc_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "put.json",
        r#"{
            "seed": 5,
            "grid": {"horizon": 1.0, "steps": 25},
            "forward": {"kind": "geometric_bm", "x0": 1.0, "vol": 0.2},
            "problem": {"builtin": "american_put", "strike": 1.0},
            "scheme": {"kind": "snell"},
            "engine": {"kind": "mc", "paths": 20000}
        }"#,
    );
    let out = dir.path().join("results");
    let status = bin()
        .args(["solve", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    let policy = diag["exercise_policy_value"].as_f64().unwrap();
    assert!((0.06..0.10).contains(&policy), "policy value {policy}");
}
