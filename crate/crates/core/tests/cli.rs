use std::fs;
use std::process::{Command, Output};

use qsep::cli::{EXIT_OK, EXIT_USAGE, EXIT_VERIFY};
use qsep::linalg;
use qsep::separating::{ideal_truncated_strategy, TruncationSpec};
use qsep::{Correlation, Side, Strategy};
use serde_json::Value;

fn qsep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsep")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_strategy(dir: &tempfile::TempDir, name: &str, s: &Strategy) -> String {
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_string(s).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn verify_passes_on_truncation() {
    let o = qsep(&["verify", "--alpha", "0.5", "--m", "8"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], Value::Bool(true));
}

#[test]
fn verify_flags_mutated_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = ideal_truncated_strategy(&TruncationSpec::new(0.5, 4).unwrap()).unwrap();
    let scaled = s.with_element(Side::A, 0, 0, s.element(Side::A, 0, 0) * linalg::re(1.1)).unwrap();
    let dropped = s.with_element(Side::B, 2, 1, linalg::zeros(8)).unwrap();
    let denormalized = s.with_state(s.state() * linalg::re(0.9)).unwrap();
    let swapped = s.with_measurement(Side::B, 4, s.alice()[1].clone()).unwrap();
    for (name, bad) in [("scaled", scaled), ("dropped", dropped), ("denormalized", denormalized), ("swapped", swapped)] {
        let path = write_strategy(&dir, &format!("{name}.json"), &bad);
        let o = qsep(&["verify", "--input", &path]);
        assert_eq!(code(&o), EXIT_VERIFY, "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains("verification failed"), "{name}");
    }
}

#[test]
fn truncate_then_induce_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let strat = dir.path().join("s.json");
    let corr = dir.path().join("p.json");
    let o = qsep(&["truncate", "--m", "3", "--out", strat.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK);
    let o = qsep(&["induce", "--input", strat.to_str().unwrap(), "--out", corr.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let p: Correlation = serde_json::from_str(&fs::read_to_string(&corr).unwrap()).unwrap();
    let s = ideal_truncated_strategy(&TruncationSpec::new(0.5, 3).unwrap()).unwrap();
    assert!(p.distance(&s.induce().unwrap(), qsep::Metric::MaxTv).unwrap() < 1e-15);

    let o = qsep(&["distance", "--inputs", corr.to_str().unwrap(), corr.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["distance"].as_f64(), Some(0.0), "{v}");
}

#[test]
fn outputs_are_deterministic() {
    for args in [
        &["tables", "--alpha", "0.3"][..],
        &["schmidt", "--m", "4"],
        &["blocks", "--m", "4"],
        &["seesaw", "--dim", "2", "--restarts", "2", "--iters", "10", "--seed", "7"],
    ] {
        let a = qsep(args);
        let b = qsep(args);
        assert_eq!(code(&a), EXIT_OK, "{args:?}: {}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        serde_json::from_str::<Value>(&stdout(&a)).unwrap();
    }
}

#[test]
fn csv_formats() {
    let o = qsep(&["chain", "--m-min", "2", "--m-max", "4"]);
    assert_eq!(stdout(&o), "M,max_chain_length\n2,4\n3,6\n4,8\n");
    let o = qsep(&["induce", "--m", "2", "--format", "csv"]);
    assert_eq!(code(&o), EXIT_OK);
    let text = stdout(&o);
    // 4 × 5 questions, 3 × 3 answers, one header
    assert_eq!(text.lines().count(), 1 + 4 * 5 * 9);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&qsep(&[])), EXIT_USAGE);
    assert_eq!(code(&qsep(&["truncate", "--alpha", "1.5"])), EXIT_USAGE);
    assert_eq!(code(&qsep(&["induce", "--input", "/nonexistent/s.json"])), EXIT_USAGE);
    assert_eq!(code(&qsep(&["seesaw", "--dim", "0"])), EXIT_USAGE);
}
