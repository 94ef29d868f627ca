use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    p.to_str().unwrap().to_string()
}

fn nqs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nqs")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_accepts_fixtures() {
    let out = nqs(&["validate", "--model", &fixture("two_state_uncertain.json"), "--polytope", &fixture("unit_box.json")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("uncertain"));
}

#[test]
fn schema_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"A": [[1, 0]], "B": [[1]], "C": [[1]], "F": [[[0]]]}"#).unwrap();
    assert_eq!(code(&nqs(&["validate", "--model", bad.to_str().unwrap()])), 3);
    std::fs::write(&bad, r#"{"A": [[1]], "B": [[1]], "C": [[1]], "F": [[[0]]], "extra": 1}"#).unwrap();
    assert_eq!(code(&nqs(&["validate", "--model", bad.to_str().unwrap()])), 3);
    assert_eq!(code(&nqs(&["validate", "--model", "/nonexistent/model.json"])), 3);
    assert_eq!(code(&nqs(&["validate", "--model", &fixture("unit_box.json")])), 3);
    // Polytope dimension does not match the model.
    let out = nqs(&["validate", "--model", &fixture("scalar_qgcc.json"), "--polytope", &fixture("unit_box.json")]);
    assert_eq!(code(&out), 3);
}

#[test]
fn usage_errors_exit_three_and_help_exits_zero() {
    assert_eq!(code(&nqs(&["synth-qgcc", "--model"])), 3);
    assert_eq!(code(&nqs(&["no-such-command"])), 3);
    assert_eq!(code(&nqs(&["--help"])), 0);
    let out = nqs(&[
        "synth-qgcc", "--model", &fixture("scalar_qgcc.json"), "--polytope", &fixture("unit_interval.json"),
        "--umax", "[1, 2]",
    ]);
    assert_eq!(code(&out), 3, "umax of the wrong length");
}

#[test]
fn synth_l2_writes_artifacts_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("lmi.json");
    let out = nqs(&[
        "synth-l2", "--model", &fixture("scalar_gl2.json"), "--polytope", &fixture("interval_2.json"), "--umax", "5",
        "--objective", "max", "--disturbances", "10", "--h-samples", "1", "--horizon", "20", "--seed", "7",
        "--dump-lmi", dump.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let cert = read_json(&dir.path().join("certificate.json"));
    assert_eq!(cert["kind"], "gl2pc");
    assert_eq!(cert["objective_direction"], "maximize");
    assert_eq!(cert["config"]["command"], "synth-l2");
    assert_eq!(cert["config"]["seed"], 7);
    assert!(cert["config"].get("out").is_none());
    let audit = read_json(&dir.path().join("audit_report.json"));
    assert_eq!(audit["passed"], true);
    assert_eq!(audit["report"]["config"]["seed"], 7);
    let lmi = read_json(&dump);
    let labels: Vec<&str> =
        lmi["problem"]["constraints"].as_array().unwrap().iter().map(|c| c["label"].as_str().unwrap()).collect();
    assert!(labels.contains(&"gl2.lyapunov"));
}

#[test]
fn simulate_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = nqs(&[
        "simulate", "--model", &fixture("scalar_gl2.json"), "--gain", "[[-2]]", "--x0", "0",
        "--disturbance", "pulse:0:1:1", "--horizon", "2", "--dt", "0.01", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    let meta: Value = serde_json::from_str(lines.next().unwrap().trim_start_matches("# ")).unwrap();
    assert_eq!(meta["config"]["disturbance"], "pulse:0:1:1");
    assert_eq!(lines.next().unwrap(), "t,x1,u1,z1,w1");
    assert_eq!(lines.count(), 201);
}

#[test]
fn simulate_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = nqs(&[
        "simulate", "--model", &fixture("scalar_qgcc.json"), "--x0", "10", "--horizon", "10",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn audit_rejects_certificate_of_the_wrong_size() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = nqs(&[
        "synth-qgcc", "--model", &fixture("scalar_qgcc.json"), "--polytope", &fixture("unit_interval.json"),
        "--umax", "5", "--state-samples", "20", "--h-samples", "1", "--out", d,
    ]);
    assert_eq!(code(&out), 0);
    let out = nqs(&[
        "audit", "--certificate", &format!("{d}/certificate.json"), "--model", &fixture("two_state_uncertain.json"),
        "--polytope", &fixture("unit_box.json"), "--umax", "5", "--out", d,
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn simulate_accepts_nonzero_state_with_disturbance() {
    let dir = tempfile::tempdir().unwrap();
    let out = nqs(&[
        "simulate", "--model", &fixture("two_state_uncertain.json"), "--gain", "[[-14.8, -44.7]]",
        "--x0", "[0.5, -0.5]", "--disturbance", "burst:2:0:4:1", "--horizon", "5",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("output energy"));
}
