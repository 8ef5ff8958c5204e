use std::path::Path;
use std::process::{Command, Output};

fn ppsmeter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppsmeter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn scan_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"g": 0.02, "scan": {"theta_steps": 7, "phi_steps": 12}}"#,
    );
    let out = dir.path().join("scan.csv");
    let o = ppsmeter(&["sg-scan", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7 * 12);
    assert!(csv.starts_with("theta,phi,dp,dz,probability,sd_p,sd_z,error\n"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"scan": {"theta_steps": 7, "phi_steps": 12}}"#,
    );
    let o = ppsmeter(&[
        "metrics-scan",
        "--config",
        &cfg,
        "--theta-steps",
        "3",
        "--phi-steps",
        "4",
        "--g",
        "0.05",
    ]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 4);
}

#[test]
fn json_envelope_carries_metadata() {
    let o = ppsmeter(&["sg-max-vs-g", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["metadata"]["model"], "stern-gerlach");
    assert!(v["metadata"]["timestamp_unix"].is_u64());
    assert_eq!(v["rows"].as_array().unwrap().len(), 200);
    assert!(v["argmax"]["dz_max"]["value"].as_f64().unwrap() < 1.0);
}

#[test]
fn plot_script_references_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = ppsmeter(&[
        "sg-max-vs-g",
        "--out",
        out.to_str().unwrap(),
        "--emit-plot-script",
    ]);
    assert!(o.status.success());
    let script = std::fs::read_to_string(dir.path().join("g.gp")).unwrap();
    assert!(script.contains(out.to_str().unwrap()));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        "{\n  \"delta\": 1.0,\n  \"colour\": 3\n}",
    );
    let o = ppsmeter(&["sg-scan", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("colour") && err.contains("line 3"), "{err}");

    let cfg = write(dir.path(), "bad2.json", r#"{"delta": -2}"#);
    let o = ppsmeter(&["sg-scan", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));
}

#[test]
fn vanishing_postselection_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "orth.json",
        r#"{"model": "qubit", "g": 0.0,
            "pps": {"bloch": {"unit": "deg", "pre": {"theta": 0, "phi": 0}, "post": {"theta": 180, "phi": 0}}}}"#,
    );
    let o = ppsmeter(&["readout", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("VanishingPostselection"));
}

#[test]
fn capped_refinement_exits_with_four() {
    let o = ppsmeter(&[
        "refine",
        "--objective",
        "dz",
        "--start",
        "1.0,2.0",
        "--max-evaluations",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn refine_reports_closed_form() {
    let o = ppsmeter(&[
        "refine",
        "--objective",
        "dp",
        "--theta-steps",
        "91",
        "--phi-steps",
        "180",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let value = v["refined"]["value"].as_f64().unwrap();
    let cf = v["closed_form"].as_f64().unwrap();
    assert!((value / cf - 1.0).abs() < 1e-6);
}

#[test]
fn readout_reports_weak_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "q.json",
        r#"{"model": "generic", "observable": [1, -1], "g": 0.01,
            "pps": {"amplitudes": {"pre": [[1, 0], [0, 1]], "post": [[1, 0], [1, 0]]}}}"#,
    );
    let o = ppsmeter(&["readout", "--config", &cfg]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["weak_value"][1].as_f64().unwrap() + 1.0).abs() < 1e-15);
    assert!((v["readout"]["dq"].as_f64().unwrap() - 0.02 * (-2e-4f64).exp()).abs() < 1e-15);
}

#[test]
fn oracle_check_passes_on_random_cases() {
    let o = ppsmeter(&["oracle-check", "--cases", "20", "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["checked"], 20);
}

#[test]
fn thread_cap_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_ppsmeter"))
            .args(["metrics-scan", "--theta-steps", "37", "--phi-steps", "72"])
            .env("PPSMETER_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}
