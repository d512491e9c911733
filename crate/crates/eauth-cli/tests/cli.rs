//! CLI contract tests: exit codes, JSON output shapes, and the calibrate
//! config round trip.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eauth")
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let out = Command::new(bin()).arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage"), "no usage text: {stderr}");
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = Command::new(bin()).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_kd_prints_report_with_eer() {
    let out = Command::new(bin())
        .args(["evaluate", "--instrument", "kd", "--speakers", "4", "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("stdout is a JSON report");
    assert_eq!(report["instrument"], "kd");
    assert!(report["eer"].is_number());
    assert!(report["det"].is_array());
}

#[test]
fn evaluate_writes_det_csv() {
    let dir = tempfile::TempDir::new().unwrap();
    let csv_path = dir.path().join("det.csv");
    let out = Command::new(bin())
        .args([
            "evaluate",
            "--instrument",
            "kd",
            "--speakers",
            "3",
            "--seed",
            "1",
            "--det-csv",
        ])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("far,frr,threshold\n"));
    assert!(csv.lines().count() > 2);
}

#[test]
fn domain_error_exits_1_with_json_error() {
    let dir = tempfile::TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, "{}").unwrap();
    let out = Command::new(bin())
        .args(["report", "--config"])
        .arg(&config)
        .args(["--activity", "missing"])
        .env("EAUTH_DATA_DIR", dir.path().join("data"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(err["error"]["code"], "ReportNotFound");
}

#[test]
fn missing_input_file_exits_1() {
    let dir = tempfile::TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, "{}").unwrap();
    let out = Command::new(bin())
        .args(["pad", "--config"])
        .arg(&config)
        .args(["--modality", "voice", "no-such-file.wav"])
        .env("EAUTH_DATA_DIR", dir.path().join("data"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

/// Calibrating the KD threshold rewrites the config, and a subsequent
/// verify runs at the new operating point.
#[test]
fn calibrate_then_verify_uses_new_threshold() {
    let dir = tempfile::TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    std::fs::copy(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fixture_config.json"),
        &config,
    )
    .unwrap();
    let data = dir.path().join("data");
    let run = |args: &[&str]| {
        let out = Command::new(bin())
            .args(args)
            .env("EAUTH_DATA_DIR", &data)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };

    let cfg = config.display().to_string();
    let out = run(&[
        "calibrate", "--config", &cfg, "--instrument", "kd", "--target", "eer", "--speakers",
        "4", "--seed", "7",
    ]);
    let calibration: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let threshold = calibration["threshold"].as_f64().unwrap();
    assert!(threshold > 0.0);

    // The config file now carries the calibrated threshold.
    let reloaded: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    assert!((reloaded["keystroke"]["threshold"].as_f64().unwrap() - threshold).abs() < 1e-12);

    // Enroll and verify a typist; the outcome reports the new threshold.
    run(&[
        "simulate", "typing", "--out", "typing", "--typists", "2", "--streams", "2",
        "--keystrokes", "400", "--seed", "5",
    ]);
    let out = run(&[
        "enroll", "--config", &cfg, "--register", "tess", "--modality", "keystroke",
        "--session", "s1", "typing/typist00_stream00.jsonl",
    ]);
    let first = String::from_utf8(out.stdout).unwrap();
    let learner: serde_json::Value =
        serde_json::from_str(first.lines().next().unwrap()).unwrap();
    let id = learner["id"].as_str().unwrap();

    let out = run(&[
        "verify", "--config", &cfg, "--learner", id, "--modality", "keystroke",
        "typing/typist00_stream01.jsonl",
    ]);
    let outcome: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((outcome["threshold"].as_f64().unwrap() - threshold).abs() < 1e-12);
}
