use std::path::PathBuf;
use std::process::{Command, Output};

use ildtt::report::{Report, Status};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn ildtt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ildtt")).args(args).env_remove("ILDTT_STEP_LIMIT").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_theorem3_fixture_passes() {
    let o = ildtt(&["check", fixture("thm3.ildtt").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("0 failed"));
}

#[test]
fn check_reuse_fixture_fails_with_message() {
    let o = ildtt(&["check", fixture("reuse.ildtt").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("linear variable reused: x"), "{}", stdout(&o));
}

#[test]
fn check_json_round_trips() {
    let o = ildtt(&["check", "--json", fixture("corpus.ildtt").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r: Report = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.command, "check");
    assert!(r.items.len() >= 50);
    let again: Report = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(again, r);
}

#[test]
fn verify_model_json_reports_every_condition_passing() {
    let o = ildtt(&["verify-model", "--max-index", "3", "--max-fiber", "4", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: Report = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.command, "verify-model");
    assert_eq!(r.config["max_index"], 3);
    assert_eq!(r.items.len(), 9);
    assert!(r.items.iter().all(|i| i.status == Status::Pass));
    let again: Report = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(again, r);
}

#[test]
fn bad_bounds_and_missing_files_are_usage_errors() {
    assert_eq!(ildtt(&["verify-model", "--max-index", "0"]).status.code(), Some(2));
    assert_eq!(ildtt(&["verify-model", "--max-fiber", "99"]).status.code(), Some(2));
    assert_eq!(ildtt(&["check", "/no/such/file.ildtt"]).status.code(), Some(2));
    assert_eq!(ildtt(&["frobnicate"]).status.code(), Some(2));
    let thm3 = fixture("thm3.ildtt");
    assert_eq!(ildtt(&["norm", thm3.to_str().unwrap(), "--term", "missing"]).status.code(), Some(2));
}

#[test]
fn norm_trace_lists_steps() {
    let o = ildtt(&["norm", fixture("corpus.ildtt").to_str().unwrap(), "--term", "plus_beta", "--trace"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("step 1: ⊸-C"), "{out}");
    assert!(out.contains("lam (x : A) x : A -o A in 2 steps"), "{out}");
}

#[test]
fn step_limit_comes_from_the_environment() {
    let path = fixture("corpus.ildtt");
    let o = Command::new(env!("CARGO_BIN_EXE_ildtt"))
        .args(["norm", path.to_str().unwrap(), "--term", "plus_beta"])
        .env("ILDTT_STEP_LIMIT", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("step limit of 1 exceeded"), "{}", stdout(&o));
}

#[test]
fn eval_prints_fibers_and_map_tables() {
    let o = ildtt(&["eval", fixture("corpus.ildtt").to_str().unwrap(), "--term", "swap"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("⟦A * B -o B * A⟧ = {"), "{out}");
    assert!(out.contains("(a1,b1) ↦ (b1,a1)"), "{out}");
}

#[test]
fn eval_needs_model_bindings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bare.ildtt");
    std::fs::write(&path, "type A.\nconst a : A.\ndef x : A := a.\n").unwrap();
    let o = ildtt(&["eval", path.to_str().unwrap(), "--term", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model bindings"));
}

#[test]
fn theorems_pass_for_a_seed() {
    let o = ildtt(&["theorems", "--seed", "7", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: Report = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.config["seed"], 7);
    assert!(r.items.iter().any(|i| i.name == "consistency"));
}
