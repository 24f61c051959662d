use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn qsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn scenario_q1() {
    let out = qsched(&["scenario", "Q1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["top_slot"], 0);
    assert_eq!(v["exchanges"], 1);
    assert!((v["success_probability"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn scenario_q34_splits_between_slots() {
    let v = json(&qsched(&["scenario", "Q34"]));
    let d: Vec<f64> = v["distribution"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    for (p, want) in d.iter().zip([0.0, 0.0, 0.5, 0.5]) {
        assert!((p - want).abs() < 1e-10);
    }
}

#[test]
fn scenario_file_and_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let desc = dir.path().join("q3.toml");
    fs::write(
        &desc,
        format!(
            "n_slots = 4\nalice_available = [2, 3]\nbob_available = [1, 2]\noutput_path = {:?}\n",
            report.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = qsched(&["scenario", desc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let written: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(written["top_slot"], 2);
    assert_eq!(written["scenario"], "q3");
}

#[test]
fn malformed_scenario_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let desc = dir.path().join("bad.toml");
    fs::write(
        &desc,
        "n_slots = 6\nalice_available = [0]\nbob_available = [0]\n",
    )
    .unwrap();
    let out = qsched(&["scenario", desc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_slots"));

    let out = qsched(&["scenario", "Q7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn original_variant_fails_at_half_density() {
    let dir = tempfile::tempdir().unwrap();
    let desc = dir.path().join("orig.json");
    fs::write(
        &desc,
        r#"{"n_slots": 4, "alice_available": [0, 1], "bob_available": [0, 3], "variant": "original"}"#,
    )
    .unwrap();
    let out = qsched(&["scenario", desc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_registry() {
    let out = qsched(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let gates = v["gates"].as_array().unwrap();
    assert_eq!(gates.len(), 11);
    let names: Vec<&str> = gates.iter().map(|g| g["gate"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(gates
        .iter()
        .all(|g| g["residual"].as_f64().unwrap() <= 1e-10));
}

#[test]
fn verify_miscalibrated_fails() {
    let out = qsched(&["verify", "--miscalibration", "0.02"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert!(v["gates"]
        .as_array()
        .unwrap()
        .iter()
        .any(|g| g["residual"].as_f64().unwrap() > 1e-10));
}

#[test]
fn verify_single_gate_and_refocus() {
    let out = qsched(&[
        "verify",
        "--gate",
        "U",
        "--refocus-trials",
        "100",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["gates"].as_array().unwrap().len(), 1);
    assert!(v["gates"][0]["residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["refocus"]["passed"], true);

    assert_eq!(qsched(&["verify", "--gate", "X"]).status.code(), Some(2));
}

#[test]
fn export_fig1_variants() {
    let v = json(&qsched(&["export-fig1"]));
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 3);
    assert!(entries.iter().all(|e| e.get("simulated").is_none()));

    let v = json(&qsched(&["export-fig1", "--miscalibration", "0.02"]));
    let entries = v.as_array().unwrap();
    assert!(entries
        .iter()
        .all(|e| e["simulated"].is_object() && e["error_report"].is_object()));

    let out = qsched(&["export-fig1", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 4);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("Q1,theory,0,1,0,0,0"));
}

#[test]
fn export_fig1_unwritable_path() {
    let out = qsched(&["export-fig1", "--output", "/nonexistent-dir/fig1.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn protocol_log() {
    let out = qsched(&["protocol", "Q2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.ends_with("I_B Bob")));
    assert!(text
        .lines()
        .last()
        .unwrap()
        .starts_with("summary exchanges=1"));
}

#[test]
fn output_is_deterministic() {
    for args in [
        &["scenario", "Q12"][..],
        &["verify", "--refocus-trials", "20"],
        &["export-fig1", "--miscalibration", "0.02"],
    ] {
        assert_eq!(qsched(args).stdout, qsched(args).stdout);
    }
}
