use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qls(args: &[&str], job: Option<&str>) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qls"));
    cmd.args(args);
    if let Some(job) = job {
        let path = dir.path().join("job.json");
        fs::write(&path, job).unwrap();
        cmd.arg("--job").arg(&path);
    }
    (cmd.output().unwrap(), dir)
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_report(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn check_scheme_accepts_the_gambier_pair() {
    let (out, _d) = qls(&["check-scheme"], Some(r#"{"w": "W_G", "v": "V_G"}"#));
    assert_eq!(out.status.code(), Some(0));
    let r = stdout_json(&out);
    assert_eq!(r["schema"], 1);
    let conds = r["conditions"].as_array().unwrap();
    assert_eq!(conds.len(), 3);
    assert!(conds.iter().all(|c| c["holds"] == true));
}

#[test]
fn check_scheme_reports_the_closure_witness() {
    let (out, _d) = qls(&["check-scheme"], Some(r#"{"w": "V_G", "v": "V_G"}"#));
    assert_eq!(out.status.code(), Some(1));
    let r = stdout_json(&out);
    let closed = r["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["condition"] == "[W,W] subset W")
        .unwrap();
    assert!(closed["witnesses"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w["pair"] == serde_json::json!(["Y3", "Y6"])));
}

#[test]
fn reduce_rejects_n_equal_two() {
    let job = r#"{"model": {"a0": "1", "a1": "1", "sigma": 1, "n": 2}, "span": [0, 1]}"#;
    let (out, _d) = qls(&["reduce"], Some(job));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist for n=2"));
    assert_eq!(stderr_report(&out)["error"]["kind"], "precondition");
}

#[test]
fn bracket_table_matches_golden() {
    let (out, _d) = qls(&["bracket-table"], None);
    assert_eq!(out.status.code(), Some(0));
    let golden = include_str!("golden/bracket-table.json");
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
    let r: Value = serde_json::from_str(golden).unwrap();
    assert_eq!(r["table1"].as_array().unwrap().len(), 33);
    assert_eq!(r["table2"].as_array().unwrap().len(), 18);
}

#[test]
fn malformed_jobs_exit_with_two() {
    let (out, _d) = qls(
        &["reduce"],
        Some(r#"{"model": {"a0": "1 +", "n": 1}, "span": [0, 1]}"#),
    );
    assert_eq!(out.status.code(), Some(2));
    let (out, _d) = qls(
        &["reduce"],
        Some(r#"{"model": {"a0": "1", "n": 1}, "span": [0, 1], "extra": 0}"#),
    );
    assert_eq!(out.status.code(), Some(2));
    let (out, _d) = qls(&["integrate"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    // the oscillator form is indefinite, so the radicand turns negative
    let job = r#"{"rule": "mp_oscillators", "omega": "1", "a00": 1, "k1": 1, "k2": 1, "t1": 3}"#;
    let (out, _d) = qls(&["superpose"], Some(job));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_report(&out)["exit_code"], 3);
}

#[test]
fn integrate_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let job = r#"{"model": {"family": "gambier", "a0": "0.01", "sigma": 1, "n": 2}, "t1": 3, "initial": [1, -1]}"#;
    let (out, _d) = qls(
        &["integrate", "--out", dir.path().to_str().unwrap()],
        Some(job),
    );
    assert_eq!(out.status.code(), Some(0));
    let r: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("integrate.json")).unwrap())
            .unwrap();
    assert_eq!(r["termination"]["reason"], "singularity");
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x,v\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn transport_through_to_ks2_is_tight() {
    let job = r#"{"model": {"a0": "-2*exp(sin(t))", "a1": "cos(t)", "a2": "1 + t", "n": -2},
                  "alpha": "exp(t/5)", "span": [0, 1], "initial": [0.4, 0.1]}"#;
    let (out, _d) = qls(&["to-ks2"], Some(job));
    assert_eq!(out.status.code(), Some(0));
    let r = stdout_json(&out);
    assert_eq!(r["family"], "ks2");
    assert!(r["transport"]["sup_gap"].as_f64().unwrap() < 1e-6);
}

#[test]
fn exact_solve_matches_direct_integration() {
    let job = r#"{"model": {"a0": "-exp(t/2)", "a1": "sin(t)", "a2": "0.5 + t", "n": 1}, "initial": [0.6, -0.2], "t1": 1}"#;
    let (out, _d) = qls(&["exact-solve"], Some(job));
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout_json(&out)["sup_gap_to_direct_integration"]
            .as_f64()
            .unwrap()
            < 1e-6
    );
}

#[test]
fn invariant_report_is_byte_identical_across_runs() {
    let job = r#"{"invariant": "easy", "lambda": 0.3, "initial": [0.3, -0.5], "t1": 1,
                  "model": {"a0": "-2*exp(sin(t))", "a1": "cos(t)", "a2": "-0.3*exp(2*sin(t))", "n": -2}}"#;
    let (a, _d1) = qls(&["invariant"], Some(job));
    let (b, _d2) = qls(&["invariant"], Some(job));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout_json(&a)["drift"].as_f64().unwrap() < 1e-6);
}

#[test]
fn verify_passes_and_records_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _d) = qls(
        &[
            "verify",
            "--seed",
            "7",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(Path::new(dir.path()).join("verify.json")).unwrap();
    let r: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(r["seed"], 7);
    assert_eq!(r["criteria"].as_array().unwrap().len(), 8);
}
