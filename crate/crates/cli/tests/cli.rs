use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn qdesk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdesk"))
        .args(args)
        .env_remove("QDESK_SEED")
        .current_dir(root())
        .output()
        .unwrap()
}

fn record(args: &[&str]) -> Value {
    let out = qdesk(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn unknown_gate_exits_with_2() {
    let out = qdesk(&["run", "configs/bad_gate.qc"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn missing_file_exits_with_1() {
    let out = qdesk(&["run", "configs/no_such_file.qc"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bell_histogram_has_only_correlated_outcomes() {
    let r = record(&["run", "configs/bell.qc", "--shots", "1000", "--readout", "bitstring"]);
    assert_eq!(r["command"], "run");
    let counts = r["outputs"]["shots"]["counts"].as_object().unwrap();
    let total: u64 = counts.values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 1000);
    assert!(counts.keys().all(|k| k == "00" || k == "11"));
}

#[test]
fn empty_circuit_reads_plus_one() {
    let r = record(&["run", "configs/empty.qc"]);
    assert_eq!(r["outputs"]["expectation"].as_f64().unwrap(), 1.0);
    assert_eq!(r["outputs"]["n_gates"], 0);
}

#[test]
fn noise_flag_changes_the_state() {
    let r = record(&["run", "configs/bell.qc", "--noise", "configs/noise.json"]);
    assert_eq!(r["outputs"]["noisy"], true);
    let probs: Vec<f64> = serde_json::from_value(r["outputs"]["probabilities"].clone()).unwrap();
    assert!(probs[1] > 0.0 && probs[2] > 0.0);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn vqe_on_identity_returns_one() {
    let r = record(&["vqe", "configs/vqe_identity.json"]);
    assert!((r["outputs"]["energy"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn zne_without_noise_leaves_value_alone() {
    let r = record(&["zne", "configs/bell.qc"]);
    let raw = r["outputs"]["raw"].as_f64().unwrap();
    let mitigated = r["outputs"]["mitigated"].as_f64().unwrap();
    assert!((raw - mitigated).abs() < 1e-12);
}

#[test]
fn csv_export_writes_table() {
    let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join("qft_check.csv");
    let csv = path.to_str().unwrap();
    record(&["qft-check", "--max-qubits", "3", "--csv", csv]);
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n_qubits,gates,max_deviation,pass");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.ends_with("true")));
}

#[test]
fn out_flag_writes_record_file() {
    let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join("bell_record.json");
    let out = qdesk(&["run", "configs/bell.qc", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["schema_version"], "1.0");
}

#[test]
fn seed_comes_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_qdesk"))
        .args(["run", "configs/bell.qc", "--shots", "100"])
        .env("QDESK_SEED", "17")
        .current_dir(root())
        .output()
        .unwrap();
    let from_env: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(from_env["seed"], 17);
    let from_flag = record(&["run", "configs/bell.qc", "--shots", "100", "--seed", "17"]);
    assert_eq!(from_env["outputs"], from_flag["outputs"]);
}

#[test]
fn qec_table_matches_requested_models() {
    let r = record(&["qec", "--code", "bitflip3", "--error-model", "x", "--error-model", "z", "--trials", "10"]);
    let rows = r["outputs"]["summaries"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["success_rate"].as_f64().unwrap(), 1.0);
    assert!(rows[1]["success_rate"].as_f64().unwrap() < 1.0);
}

#[test]
fn invalid_zne_config_exits_with_2() {
    let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join("bad_zne.json");
    std::fs::write(&path, r#"{"scale_factors": [1.0, 1.0], "fit_model": {"model": "linear"}}"#).unwrap();
    let out = qdesk(&["zne", "configs/zne_depolarizing.qc", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
