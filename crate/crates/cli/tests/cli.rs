use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems")
}

fn qsdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_json(file: &Path) -> (i32, Value) {
    let out = qsdp(&["run", "--json", "--recheck", file.to_str().unwrap()]);
    let report = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{}: {e}\n{}",
            file.display(),
            String::from_utf8_lossy(&out.stderr)
        )
    });
    (out.status.code().unwrap(), report)
}

fn write_temp(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qsdp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr_of(args: &[&str]) -> (i32, String) {
    let out = qsdp(args);
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn pauli_data_exit_two_with_certificate() {
    let (code, r) = run_json(&problems().join("pauli-09-05.json"));
    assert_eq!(code, 2);
    assert_eq!(r["verdict"], "infeasible");
    assert_eq!(r["certificate"]["valid"], true);
    assert!(r["certificate"]["beta"].as_f64().unwrap() > 0.0);
    assert_eq!(r["recheck"]["passed"], true);
}

#[test]
fn origin_data_exit_zero_with_maximally_mixed_witness() {
    let (code, r) = run_json(&problems().join("mixed-origin.json"));
    assert_eq!(code, 0);
    assert_eq!(r["verdict"], "feasible");
    let state = &r["witnesses"][0]["state"];
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { 0.5 } else { 0.0 };
            assert!((state[i][j][0].as_f64().unwrap() - want).abs() < 1e-6);
            assert!(state[i][j][1].as_f64().unwrap().abs() < 1e-6);
        }
    }
}

#[test]
fn bell_pairs_exit_two_with_three_quarter_bound() {
    let (code, r) = run_json(&problems().join("bell-bell-marginal.json"));
    assert_eq!(code, 2);
    assert_eq!(r["certificate"]["kind"], "marginal");
    assert_eq!(r["certificate"]["valid"], true);
    assert!((r["values"]["mu_star"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    let prose = qsdp(&["run", problems().join("bell-bell-marginal.json").to_str().unwrap()]);
    let text = String::from_utf8_lossy(&prose.stdout);
    assert!(text.contains("mu* = 0.750000000"), "{text}");
}

#[test]
fn every_task_file_rechecks() {
    let mut files: Vec<PathBuf> = std::fs::read_dir(problems().join("tasks"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert_eq!(files.len(), 14);
    for file in files {
        let (code, r) = run_json(&file);
        assert!(code == 0 || code == 2, "{}: exit {code}", file.display());
        assert_eq!(r["recheck"]["passed"], true, "{}: {}", file.display(), r["recheck"]);
        if r["verdict"] == "infeasible" {
            assert_eq!(r["certificate"]["valid"], true, "{}", file.display());
        }
    }
}

#[test]
fn batch_runs_a_directory() {
    let out = qsdp(&["run", "--json", "--batch", problems().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let all: Value = serde_json::from_slice(&out.stdout).unwrap();
    let verdicts: Vec<&str> = all
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["verdict"].as_str().unwrap())
        .collect();
    assert_eq!(verdicts, ["infeasible", "feasible", "infeasible"]);
}

#[test]
fn output_is_deterministic_for_a_seed() {
    let file = problems().join("tasks").join("fidelity-mixed.json");
    let strip = |args: &[&str]| {
        let mut v: Value = serde_json::from_slice(&qsdp(args).stdout).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_s");
        v
    };
    let args = ["run", "--json", "--seed", "42", file.to_str().unwrap()];
    let first = strip(&args);
    assert_eq!(first["seed"], 42);
    assert_eq!(first, strip(&args));
}

#[test]
fn validate_accepts_bundled_files() {
    for name in ["pauli-09-05.json", "mixed-origin.json", "bell-bell-marginal.json"] {
        let out = qsdp(&["validate", problems().join(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok"));
    }
}

#[test]
fn validate_names_the_asymmetric_entry() {
    let path = write_temp(
        "asym.json",
        r#"{"schema_version": 1, "task": "feasibility", "records": [
            {"observable": [[[1,0],[0,0]],[[0,0],[-1,0]]], "value": 0.1},
            {"observable": [[[0,0],[0,1]],[[0,1],[0,0]]], "value": 0.1}]}"#,
    );
    let (code, err) = stderr_of(&["validate", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("records[1].observable") && err.contains("(0, 1)"), "{err}");
}

#[test]
fn validate_names_mismatched_records() {
    let path = write_temp(
        "dims.json",
        r#"{"schema_version": 1, "task": "feasibility", "records": [
            {"observable": [[[1,0],[0,0]],[[0,0],[-1,0]]], "value": 0.1},
            {"observable": [[[1,0]]], "value": 1}]}"#,
    );
    let (code, err) = stderr_of(&["validate", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("records[1]") && err.contains("records[0]"), "{err}");
}

#[test]
fn parse_errors_exit_one_and_name_the_field() {
    let path = write_temp(
        "missing.json",
        r#"{"schema_version": 1, "task": "trace-distance",
            "records": [{"observable": [[[1,0],[0,0]],[[0,0],[-1,0]]], "value": 0.1}]}"#,
    );
    let (code, err) = stderr_of(&["run", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("target"), "{err}");
    let (code, _) = stderr_of(&["run", "/nonexistent/problem.json"]);
    assert_eq!(code, 1);
}

#[test]
fn iteration_cap_is_a_numerical_failure() {
    let file = problems().join("pauli-09-05.json");
    let (code, err) = stderr_of(&["run", "--max-iter", "2", file.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("MaxIterations"), "{err}");
}

#[test]
fn closeness_on_inconsistent_data_is_certified() {
    let path = write_temp(
        "td.json",
        r#"{"schema_version": 1, "task": "trace-distance",
            "records": [{"observable": [[[0,0],[1,0]],[[1,0],[0,0]]], "value": 0.9},
                        {"observable": [[[0,0],[0,-1]],[[0,1],[0,0]]], "value": 0.5}],
            "target": [[[1,0],[0,0]],[[0,0],[0,0]]]}"#,
    );
    let (code, r) = run_json(&path);
    assert_eq!(code, 2);
    assert_eq!(r["certificate"]["valid"], true);
    assert_eq!(r["recheck"]["passed"], true);
}
