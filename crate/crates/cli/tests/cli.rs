use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynfilter"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_default_passes_and_is_deterministic() {
    let a = run(&["verify"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&["verify"]);
    assert_eq!(a.stdout, b.stdout);
    let report = json(&a);
    assert_eq!(report["failed"], 0);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn shipped_verify_config_matches_the_defaults() {
    let a = json(&run(&["verify"]));
    let b = json(&run(&["--config", config("verify.toml").to_str().unwrap(), "verify"]));
    assert_eq!(a["checks"], b["checks"]);
}

#[test]
fn negative_control_exits_one() {
    let out = run(&["--config", config("negative-control.toml").to_str().unwrap(), "verify"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAILED sticky"));
}

#[test]
fn empty_model_list_warns_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    fs::write(&path, "[verify]\nmodels = []\n").unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "verify"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(json(&out)["checks"].as_array().unwrap().len(), 0);
}

#[test]
fn config_and_budget_errors_exit_two() {
    assert_eq!(run(&["--config", "/nonexistent.toml", "verify"]).status.code(), Some(2));
    assert_eq!(run(&["--seed-bits", "21", "verify"]).status.code(), Some(2));
    assert_eq!(run(&["--format", "csv", "verify"]).status.code(), Some(2));
    assert_eq!(run(&["--trials", "0", "fp-rate"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.toml");
    fs::write(&big, "[verify]\nu = 200\nn = 10\n").unwrap();
    assert_eq!(run(&["--config", big.to_str().unwrap(), "verify"]).status.code(), Some(2));
    let typo = dir.path().join("typo.toml");
    fs::write(&typo, "[verify]\nseedbits = 4\n").unwrap();
    assert_eq!(run(&["--config", typo.to_str().unwrap(), "verify"]).status.code(), Some(2));
}

#[test]
fn fp_rate_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("fp.csv");
    let out = run(&["--trials", "500", "--format", "csv", "--out", out_path.to_str().unwrap(), "fp-rate"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u,n,eps_plus,ell,trials,fp_rate,ci95_low,ci95_high"));
    assert!(lines.next().unwrap().starts_with("65536,16,0.125,7,500,"));
}

#[test]
fn demo_and_bounds_pass() {
    let demo = run(&["demo-violations"]);
    assert_eq!(demo.status.code(), Some(0));
    assert_eq!(json(&demo)["cases"][0]["frequency"], "1/1");
    let bounds = run(&["bounds"]);
    assert_eq!(bounds.status.code(), Some(0));
    assert_eq!(json(&bounds)["space"].as_array().unwrap().len(), 2);
}

#[test]
fn encode_then_decode() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("code.json");
    let enc = run(&[
        "--out",
        code.to_str().unwrap(),
        "encode",
        "--model",
        "exact-set",
        "--u",
        "4",
        "--n",
        "2",
        "--seed-bits",
        "4",
        "--seed",
        "0",
        "--dataset",
        "1,3",
    ]);
    assert_eq!(enc.status.code(), Some(0), "{}", String::from_utf8_lossy(&enc.stderr));
    let envelope: serde_json::Value = serde_json::from_str(&fs::read_to_string(&code).unwrap()).unwrap();
    assert_eq!(envelope["code"]["index"], "0");

    let dec = run(&["decode", code.to_str().unwrap()]);
    assert_eq!(dec.status.code(), Some(0));
    assert_eq!(json(&dec)["dataset"], serde_json::json!([1, 3]));

    let bad = run(&["encode", "--model", "exact-set", "--u", "4", "--n", "2", "--dataset", "1"]);
    assert_eq!(bad.status.code(), Some(2));
}
