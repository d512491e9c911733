//! Runs the HTTP service over a temporary data directory and exercises its
//! endpoints in-process: register, enroll, verify, PAD, and the trust
//! report for one activity.
//!
//! Run with: `cargo run --example http_service`

use std::sync::Arc;

use eauth::config::ServiceConfig;
use eauth::engine::{Engine, SamplePayload};
use eauth::eval::{synth_typing, SyntheticTypistProfile};
use eauth::service::{router, WireSample};
use tower::ServiceExt;

async fn post(
    app: &axum::Router,
    path: &str,
    body: serde_json::Value,
) -> (axum::http::StatusCode, serde_json::Value) {
    let request = axum::http::Request::builder()
        .method("POST")
        .uri(path)
        .header("content-type", "application/json")
        .body(axum::body::Body::from(body.to_string()))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = axum::body::to_bytes(response.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null))
}

#[tokio::main]
async fn main() {
    let dir = tempfile::TempDir::new().unwrap();
    let mut cfg = ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        ..ServiceConfig::default()
    };
    cfg.policies.keystroke.min_payload = 300.0;
    // Keystroke-only operating point: exp(-distance) calibration puts a
    // typical genuine probe near 0.4, so the all-instruments default of
    // 0.6 would be unreachable here.
    cfg.fusion.trust_threshold = 0.3;

    let engine = Arc::new(Engine::open(cfg).unwrap());
    let app = router(engine);

    let (_, health) = post(&app, "/learners", serde_json::json!({"display_name": "alice"})).await;
    let learner = health["id"].as_str().unwrap().to_string();
    println!("registered learner {learner}");

    let typists = SyntheticTypistProfile::separated_population(2, 9);
    let sample = |profile: &SyntheticTypistProfile, n: usize, seed: u64| {
        serde_json::to_value(WireSample::from_payload(&SamplePayload::Keystrokes(
            synth_typing(profile, n, seed),
        )))
        .unwrap()
    };

    let (status, enroll) = post(
        &app,
        &format!("/learners/{learner}/enroll/keystroke"),
        serde_json::json!({
            "session_id": "s1",
            "samples": [sample(&typists[0], 400, 1)],
            "finalize": true,
        }),
    )
    .await;
    println!("enroll: {status} complete={} templates={}", enroll["status"]["complete"], enroll["templates"]);

    // Only the genuine attempt belongs to the assessment activity; the
    // impostor probe is scored standalone for comparison.
    for (label, profile, activity) in [
        ("genuine", &typists[0], Some("demo")),
        ("impostor", &typists[1], None),
    ] {
        let mut body = serde_json::json!({"sample": sample(profile, 150, 7)});
        if let Some(activity) = activity {
            body["activity_id"] = activity.into();
        }
        let (_, outcome) = post(
            &app,
            &format!("/learners/{learner}/verify/keystroke"),
            body,
        )
        .await;
        println!(
            "{label:>9} verify: score {:.3} accepted={}",
            outcome["score"].as_f64().unwrap(),
            outcome["accepted"]
        );
    }

    let (_, report) = post(
        &app,
        "/activities/demo/report",
        serde_json::json!({"identity": learner}),
    )
    .await;
    println!(
        "trust report: decision={} fused={:.3}",
        report["decision"],
        report["fused_score"].as_f64().unwrap()
    );

    println!("\nto run the network service instead:");
    println!("  eauth serve --config config.json");
    println!("  curl http://127.0.0.1:7878/health");
}
