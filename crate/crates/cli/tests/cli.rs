use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vstate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vstate")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn spectrum_reports_both_eigenvalues() {
    let out = vstate(&["spectrum", "--m", "4", "--b", "0.63"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let delta = r["delta"].as_f64().unwrap();
    assert!(delta > 0.0 && delta < 0.05);
    let (lm, lp) = (r["lambda_minus"].as_f64().unwrap(), r["lambda_plus"].as_f64().unwrap());
    assert!((lp - lm - 2.0 * delta.sqrt() / 4.0).abs() < 1e-14);
    assert!((r["omega_plus"].as_f64().unwrap() - (1.0 - lm) / 2.0).abs() < 1e-15);
    assert_eq!(r["degenerate"], Value::Bool(false));
}

#[test]
fn spectrum_degenerate_and_complex() {
    let r = report(&vstate(&["spectrum", "--m", "3", "--b", "0.5"]));
    assert_eq!(r["degenerate"], Value::Bool(true));
    assert_eq!(r["lambda_minus"], r["lambda_plus"]);
    let out = vstate(&["spectrum", "--m", "3", "--b", "0.7"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no real eigenvalue"));
}

#[test]
fn bstar_for_four_fold() {
    let r = report(&vstate(&["bstar", "--m", "4"]));
    assert!((r["bstar"].as_f64().unwrap() - (2f64.sqrt() - 1.0).sqrt()).abs() < 1e-12);
}

#[test]
fn coeffs_warns_at_degenerate_radius() {
    let out = vstate(&["coeffs", "--m", "3", "--b", "0.5"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["coefficients"]["a"].as_f64().unwrap(), 0.0);
    assert_eq!(r["degenerate"], Value::Bool(true));
    assert!(r["ellipse"].is_null());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));

    let r = report(&vstate(&["coeffs", "--m", "4", "--b", "0.63"]));
    assert!(r["coefficients"]["a"].as_f64().unwrap() > 0.0);
    assert!(r["ellipse"]["semi_t"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let state_s = state.to_str().unwrap();
    let out = vstate(&[
        "solve", "--m", "4", "--b", "0.63", "--lambda", "0.73131", "--modes", "16", "--output", state_s,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!(r["t"].as_f64().unwrap() > 1e-3);

    let out = vstate(&["verify", state_s, "--density", "100"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!(r["residual_sup"].as_f64().unwrap() < 1e-12);
    assert!(r["residual_sup_refined"].as_f64().unwrap() < 1e-10);
    assert!(r["velocity_normal_max"].as_f64().unwrap() < 1e-4);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"format\": ").unwrap();
    assert_eq!(code(&vstate(&["verify", bad.to_str().unwrap()])), 4);

    let invalid = dir.path().join("invalid.json");
    std::fs::write(
        &invalid,
        r#"{"format":"vstate-patch/1","m":4,"b":1.2,"lambda":0.7,"omega":0.15,"outer":[0.0],"inner":[0.0]}"#,
    )
    .unwrap();
    assert_eq!(code(&vstate(&["verify", invalid.to_str().unwrap()])), 5);

    assert_eq!(code(&vstate(&["verify", dir.path().join("missing.json").to_str().unwrap()])), 4);
}

#[test]
fn config_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"m": 3, "b": 0.5}"#).unwrap();
    let r = report(&vstate(&["--config", cfg.to_str().unwrap(), "spectrum", "--m", "4", "--b", "0.63"]));
    assert_eq!(r["m"], 3);
    assert_eq!(r["degenerate"], Value::Bool(true));

    std::fs::write(&cfg, r#"{"n": 3}"#).unwrap();
    assert_eq!(code(&vstate(&["--config", cfg.to_str().unwrap(), "bstar", "--m", "4"])), 4);
    std::fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(code(&vstate(&["--config", cfg.to_str().unwrap(), "bstar", "--m", "4"])), 4);
}

fn short_trace(dir: &Path, name: &str) -> (Output, String) {
    let stem = dir.join(name);
    let out = vstate(&[
        "trace", "--m", "4", "--b", "0.64", "--modes", "8", "--max-steps", "12", "--output", stem.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(dir.join(format!("{name}.csv"))).unwrap();
    (out, csv)
}

#[test]
fn trace_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (out, first) = short_trace(dir.path(), "one");
    // the step budget runs out long before the loop closes
    assert_eq!(code(&out), 3);
    let (_, second) = short_trace(dir.path(), "two");
    assert_eq!(first, second);

    let mut lines = first.lines();
    assert_eq!(lines.next(), Some("index,lambda,omega,t,a_1_1,a_2_1,residual_sup"));
    assert!(!first.contains('\r'));
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 7, "{line}");
        assert_eq!(fields[0], i.to_string());
        // 17 significant digits
        assert_eq!(fields[1].split('e').next().unwrap().len(), 18);
    }
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("one.json")).unwrap()).unwrap();
    assert_eq!(sidecar["N"], 8);
    assert_eq!(sidecar["M"], 128);
    assert_eq!(sidecar["closed"], Value::Bool(false));
}

#[test]
fn trace_far_from_degenerate_radius_does_not_close() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("b040");
    let out = vstate(&["trace", "--m", "4", "--b", "0.40", "--modes", "16", "--output", stem.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let r = report(&out);
    assert_eq!(r["closed"], Value::Bool(false));
    assert!(r["points"].as_u64().unwrap() > 1);
    assert!(dir.path().join("b040.csv").exists());
}

#[test]
fn trace_without_bifurcation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("none");
    let out = vstate(&["trace", "--m", "3", "--b", "0.5", "--modes", "8", "--output", stem.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_writes_one_pair_per_radius() {
    let dir = tempfile::tempdir().unwrap();
    let out = vstate(&[
        "sweep", "--m", "4", "--b", "0.62,0.64", "--modes", "8", "--max-steps", "3", "--jobs", "2", "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    let r = report(&out);
    assert_eq!(r.as_array().unwrap().len(), 2);
    for b in ["0.62", "0.64"] {
        assert!(dir.path().join(format!("m4_b{b}_plus.csv")).exists());
        assert!(dir.path().join(format!("m4_b{b}_plus.json")).exists());
    }
}
