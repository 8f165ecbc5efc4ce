//! End-to-end tests of the `hisd` binary: flag handling, file formats, the
//! exit-code contract and trajectory round-trips.

use std::path::PathBuf;
use std::process::{Command, Output};

use hisd_cli::output::read_trajectory_jsonl;

fn hisd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hisd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tmp(name: &str) -> PathBuf {
    let dir = tempfile::tempdir().expect("tempdir").keep();
    dir.join(name)
}

#[test]
fn run_writes_initial_plus_one_record_per_step() {
    let path = tmp("a.jsonl");
    let out = hisd(&[
        "run", "--preset", "a", "--tau", "2^-6", "--T", "10", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let (header, records) = read_trajectory_jsonl(&text).unwrap();
    assert_eq!(records.len(), 641);
    assert_eq!(header.config.tau, 2f64.powi(-6));
    assert_eq!(header.config.k, 1);
    assert!(records[0].diag.is_none());
    assert!(records[1].diag.is_some());
    assert_eq!(records[640].t, 10.0);
}

#[test]
fn trajectory_file_round_trips_bit_exactly() {
    let path = tmp("roundtrip.jsonl");
    let out = hisd(&[
        "run", "--preset", "c", "--tau", "2^-4", "--T", "1", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let (header, records) = read_trajectory_jsonl(&text).unwrap();

    // re-serialize: the file is reproduced byte for byte
    let mut rebuilt = serde_json::to_string(&header).unwrap();
    rebuilt.push('\n');
    for record in &records {
        rebuilt.push_str(&serde_json::to_string(record).unwrap());
        rebuilt.push('\n');
    }
    assert_eq!(text, rebuilt);

    // and the parsed states carry the exact bits
    let reparsed = read_trajectory_jsonl(&rebuilt).unwrap().1;
    for (a, b) in records.iter().zip(&reparsed) {
        for i in 0..a.state.x.len() {
            assert_eq!(a.state.x[i].to_bits(), b.state.x[i].to_bits());
        }
    }
}

#[test]
fn run_to_stdout_when_no_output_path() {
    let out = hisd(&["run", "--energy", "quadratic", "--k", "1", "--tau", "0.1", "--T", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let (_, records) = read_trajectory_jsonl(&text).unwrap();
    assert_eq!(records.len(), 11);
    // stationary fixture: every state equals the initial one
    for record in &records {
        assert_eq!(record.state.x.as_slice(), &[0.0, 0.0, 1.0]);
    }
}

#[test]
fn non_orthogonal_initial_data_is_a_validation_error() {
    let cfg = tmp("bad.json");
    std::fs::write(
        &cfg,
        r#"{"energy":"rosenbrock","x0":[1,0,0],"directions":[[0.6,0.8,0]]}"#,
    )
    .unwrap();
    let out = hisd(&["run", "--config", cfg.to_str().unwrap(), "--tau", "0.1", "--T", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("v1ᵀx"), "stderr was: {err}");
}

#[test]
fn tau_not_dividing_horizon_is_a_validation_error() {
    let out = hisd(&["run", "--preset", "a", "--tau", "0.3", "--T", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("does not divide"));
}

#[test]
fn guard_trip_emits_machine_readable_record_and_exit_2() {
    let cfg = tmp("guard.json");
    std::fs::write(
        &cfg,
        r#"{"energy":"quadratic","matrix":[[0.0,0.0],[0.0,-3.0]],"x0":[1.0,1.0],"k":0,"T":4,"tau":[1.0],"splitting":"hessian0"}"#,
    )
    .unwrap();
    let out = hisd(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_str(stdout(&out).lines().next().unwrap())
        .expect("machine-readable record on stdout");
    assert_eq!(record["error"], "StepTooLarge");
    assert_eq!(record["step"], 1);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let out = hisd(&[
        "run", "--preset", "a", "--tau", "2^-4", "--T", "1", "--out",
        "/nonexistent-dir/x.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = hisd(&["run", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn converge_single_tau_leaves_rate_column_empty() {
    let path = tmp("single.csv");
    let out = hisd(&[
        "converge", "--preset", "a", "--tau", "2^-6", "--tau-ref", "2^-9", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "tau,err_x,CR,err_v1,CR");
    let row = lines.next().unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells.len(), 5);
    assert!(cells[2].is_empty() && cells[4].is_empty());
    assert!(lines.next().is_none());
}

#[test]
fn converge_rejects_non_nesting_reference() {
    let out = hisd(&["converge", "--preset", "a", "--tau", "2^-6", "--tau-ref", "0.01"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_passes_on_quadratic_fixture() {
    let out = hisd(&["check", "--energy", "quadratic", "--k", "2", "--tau", "0.01", "--T", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn check_reports_slope_breakdown_at_huge_tau() {
    let out = hisd(&[
        "check", "--preset", "a", "--tau", "0.5", "--tau", "0.25", "--tau", "0.125",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    assert!(text.contains("FAIL"), "{text}");
    // still a structured run, not a crash: the record closes the output
    assert!(text.lines().last().unwrap().starts_with('{'));
}

#[test]
fn key_value_config_with_flag_override() {
    let cfg = tmp("run.conf");
    std::fs::write(
        &cfg,
        "preset = b\ntau = 2^-5\nT = 1 # overridden below\n",
    )
    .unwrap();
    let path = tmp("b.jsonl");
    let out = hisd(&[
        "run", "--config", cfg.to_str().unwrap(), "--T", "2", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let (header, records) = read_trajectory_jsonl(&text).unwrap();
    assert_eq!(header.config.horizon, 2.0);
    assert_eq!(records.len(), 65);
}

#[test]
fn explicit_scheme_runs() {
    let out = hisd(&[
        "run", "--preset", "d", "--scheme", "explicit", "--tau", "2^-6", "--T", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let (header, records) = read_trajectory_jsonl(&stdout(&out)).unwrap();
    assert_eq!(header.config.k, 2);
    assert_eq!(records.len(), 65);
}
