use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_magreduce");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn beanie_config(mode: &str, a: &str, t_end: f64) -> String {
    format!(
        r#"{{"model":"beanie","mode":"{mode}","momentum":{{"mu":[1.0],"a":{a}}},
            "initial":{{"x":0.5,"xdot":0.3}},"stepper":{{"kind":"rk4","h":0.001}},"t_end":{t_end}}}"#
    )
}

fn report(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap()).unwrap()
}

#[test]
fn verify_equivalence_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "eq.json", &beanie_config("verify-equivalence", "[1.0, 0.3]", 10.0));
    let out = run(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "beanie-verify-equivalence");
    assert!(r["metrics"]["routhian_identity_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["pass"], Value::Bool(true));
    assert_eq!(r["version"].as_str().unwrap(), env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn beanie_full_csv_has_constant_nu() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "full.json", &beanie_config("full", "[1.0, 0.3]", 10.0));
    let out = run(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("beanie-full.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, ["t", "q0", "q1", "q2", "q3", "v0", "v1", "v2", "v3"]);
    // default parameters: I₁ = 2, I₂ = 1
    let nus: Vec<f64> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            3.0 * f[6] + f[5]
        })
        .collect();
    assert_eq!(nus.len(), 10_001);
    let spread = nus.iter().map(|n| (n - nus[0]).abs()).fold(0.0, f64::max);
    assert!(spread <= 1e-8, "{spread}");
}

#[test]
fn zero_linear_momentum_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.json", &beanie_config("full", "[0.0, 0.0]", 1.0));
    let out = run(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dual action not onto"));
    assert!(!dir.path().join("beanie-full.csv").exists());
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("missing.json", r#"{"model":"beanie","mode":"full"}"#),
        ("typo.json", r#"{"model":"beanie","mode":"full","t_end":1,"momentun":{}}"#),
        ("mode.json", r#"{"model":"rotor","mode":"reduce-abelian","momentum":{"mu":[1,0,0]},"t_end":1}"#),
        ("params.json", r#"{"model":"rotor","mode":"full","params":{"i":[1,1,-1]},"momentum":{"mu":[1,0,0]},"t_end":1}"#),
        ("stepper.json", r#"{"model":"rotor","mode":"full","stepper":{"kind":"rk4","h":-1},"momentum":{"mu":[1,0,0]},"t_end":1}"#),
    ] {
        let cfg = write_config(dir.path(), name, body);
        let out = run(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(run(&["run", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn failed_threshold_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let body = beanie_config("full", "[1.0, 0.3]", 1.0).replace(r#""t_end""#, r#""thresholds":{"energy_drift":0.0},"t_end""#);
    let cfg = write_config(dir.path(), "strict.json", &body);
    let out = run(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(dir.path(), "beanie-full")["pass"], Value::Bool(false));
}

#[test]
fn initial_pose_at_gimbal_lock_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"model":"rotor","mode":"full","momentum":{"mu":[0.0,0.0,2.0]},
                  "initial":{"pose":[0.0,0.1,0.0]},"t_end":1}"#;
    let cfg = write_config(dir.path(), "lock.json", body);
    let out = run(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("re-chart"));
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "eq.json", &beanie_config("verify-equivalence", "[1.0, 0.3]", 2.0));
    let mut csvs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = run(&["run", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        csvs.push(fs::read(out_dir.join("beanie-verify-equivalence.csv")).unwrap());
        csvs.push(fs::read(out_dir.join("beanie-verify-equivalence.json")).unwrap());
    }
    assert_eq!(csvs[0], csvs[2]);
    assert_eq!(csvs[1], csvs[3]);
}

#[test]
fn seed_override_changes_hash_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lemma.json", &beanie_config("verify-lemma", "[1.0, 0.3]", 0.0));
    let mut hashes = Vec::new();
    let mut csvs = Vec::new();
    for seed in ["0", "7"] {
        let out_dir = dir.path().join(seed);
        let out = run(&["run", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap(), "--seed", seed]);
        assert_eq!(out.status.code(), Some(0));
        let r = report(&out_dir, "beanie-verify-lemma");
        assert_eq!(r["seed"].as_u64().unwrap().to_string(), seed);
        hashes.push(r["config_sha256"].as_str().unwrap().to_string());
        csvs.push(fs::read_to_string(out_dir.join("beanie-verify-lemma.csv")).unwrap());
    }
    assert_ne!(hashes[0], hashes[1]);
    assert_ne!(csvs[0], csvs[1]);
    assert_eq!(csvs[0].lines().count(), 1 + 2 * 100);
}

#[test]
fn verify_prints_report_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "red.json", &beanie_config("reduce-full-group", "[1.0, 0.3]", 1.0));
    let out = Command::new(BIN).current_dir(dir.path()).args(["verify", "red.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("\"config_sha256\""));
    assert!(stdout.contains("PASS casimir_drift"));
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1, "only the config itself");
}

#[test]
fn list_models_names_both_systems() {
    let out = run(&["list-models"]);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.contains("rotor") && s.contains("beanie") && s.contains("verify-equivalence"));
}

#[test]
fn shipped_configs_pass() {
    let dir = tempfile::tempdir().unwrap();
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let out = run(&["run", path.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
            assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stdout));
            n += 1;
        }
    }
    assert!(n >= 7);
}
