use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn segal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segal"))
        .current_dir(dir)
        .env_remove("SEGAL_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn residual(r: &Value, check: &str) -> f64 {
    r["checks"].as_array().unwrap().iter().find(|c| c["check"] == check).unwrap()["residual"].as_f64().unwrap()
}

#[test]
fn suite_passes_at_default_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = segal(dir.path(), &["suite", "--n-max", "16", "--m", "1", "--R", "1", "--samples", "4000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(dir.path(), "segal_report.json");
    assert_eq!(r["schema"], 1);
    assert_eq!(r["pass"], true);
    for c in r["checks"].as_array().unwrap() {
        for key in ["check", "paper_ref", "residual", "tolerance", "pass", "regime", "params"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(segal(dir.path(), &["suite", "--bogus"]).status.code(), Some(2));
}

#[test]
fn bad_parameter_exits_two_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = segal(dir.path(), &["sew-free", "--R", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "InvalidParameter");
    let r = report(dir.path(), "segal_report.json");
    assert_eq!(r["error"]["kind"], "InvalidParameter");
}

#[test]
fn sew_free_unit_cylinders() {
    let dir = tempfile::tempdir().unwrap();
    let out = segal(dir.path(), &["sew-free", "--L1", "1", "--L2", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "segal_report.json");
    assert!(residual(&r, "sew_kernel") < 1e-10);
    assert!(residual(&r, "sew_prefactor") < 1e-10);
}

#[test]
fn zeta_runs_validate_the_oracle_first() {
    let dir = tempfile::tempdir().unwrap();
    let out = segal(dir.path(), &["trace-check", "--regime", "zeta", "--L", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "segal_report.json");
    assert_eq!(r["checks"][0]["check"], "zeta_oracle");
    assert_eq!(r["checks"][1]["regime"], "zeta");
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mc-torus", "--samples", "2000", "--seed", "7"];
    segal(dir.path(), &[&args[..], &["--out", "a.json", "--csv", "a.csv"]].concat());
    segal(dir.path(), &[&args[..], &["--out", "b.json", "--csv", "b.csv"]].concat());
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.csv"), read("b.csv"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"n_max": 4, "L1": 0.5, "seed": 11}"#).unwrap();
    segal(dir.path(), &["sew-free", "--config", "cfg.json", "--n-max", "6"]);
    let r = report(dir.path(), "segal_report.json");
    assert_eq!(r["config"]["n_max"], 6);
    assert_eq!(r["config"]["L1"], 0.5);
    assert_eq!(r["config"]["seed"], 11);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"nmax": 4}"#).unwrap();
    let out = segal(dir.path(), &["sew-free", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_from_environment_below_config() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_segal"))
            .current_dir(dir.path())
            .env("SEGAL_SEED", "42")
            .args([&["kakutani"][..], extra].concat())
            .output()
            .unwrap();
        report(dir.path(), "segal_report.json")["config"]["seed"].as_u64().unwrap()
    };
    assert_eq!(run(&[]), 42);
    std::fs::write(dir.path().join("cfg.json"), r#"{"seed": 5}"#).unwrap();
    assert_eq!(run(&["--config", "cfg.json"]), 5);
    assert_eq!(run(&["--config", "cfg.json", "--seed", "9"]), 9);
}

#[test]
fn csv_has_one_row_per_check() {
    let dir = tempfile::tempdir().unwrap();
    segal(dir.path(), &["wick-test", "--csv", "w.csv"]);
    let csv = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    let r = report(dir.path(), "segal_report.json");
    assert_eq!(csv.lines().count(), 1 + r["checks"].as_array().unwrap().len());
}
