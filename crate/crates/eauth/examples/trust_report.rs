//! Trust-report assembly: collect per-instrument outcomes for one
//! assessment activity, gate verification evidence by the paired PAD
//! instruments, and fuse the survivors into a weighted trust score.
//!
//! This example drives the trust engine directly with hand-built outcomes;
//! see the `eauth` CLI or `http_service` example for the full capture
//! pipeline feeding it.
//!
//! Run with: `cargo run --example trust_report`

use chrono::Utc;
use eauth::trust::{build_trust_report, FusionConfig, InstrumentResult};
use eauth::types::{Instrument, PadOutcome, VerificationOutcome};

fn verification(instrument: Instrument, score: f64, threshold: f64, sample: &str) -> InstrumentResult {
    InstrumentResult::verification(
        VerificationOutcome {
            instrument,
            score,
            threshold,
            accepted: score > threshold,
            per_scores: vec![],
        },
        sample,
        Utc::now(),
    )
}

fn main() {
    let fusion = FusionConfig::default();

    // A clean activity: all three instruments verified, both PADs bona fide.
    let clean = vec![
        verification(Instrument::Vr, 0.82, 0.5, "voice-1"),
        InstrumentResult::pad(PadOutcome::from_score(Instrument::Vra, 1.4), "voice-1", Utc::now()),
        verification(Instrument::Fr, 0.9, 0.5, "video-1"),
        InstrumentResult::pad(PadOutcome::from_score(Instrument::Fra, 0.8), "video-1", Utc::now()),
        verification(Instrument::Kd, 0.4, 1.5, "keys-1"),
    ];
    let report = build_trust_report("learner-1", "exam-42", clean, &fusion);
    println!(
        "clean activity:  fused {:.3} -> {:?} ({} flags)",
        report.fused_score,
        report.decision,
        report.pad_flags.len()
    );

    // Same scores, but the voice sample is flagged as a replay. The VR
    // evidence is excluded from fusion and the flag forces distrust, no
    // matter how well everything else scored.
    let spoofed = vec![
        verification(Instrument::Vr, 0.82, 0.5, "voice-2"),
        InstrumentResult::pad(PadOutcome::from_score(Instrument::Vra, -3.0), "voice-2", Utc::now()),
        verification(Instrument::Fr, 0.9, 0.5, "video-2"),
        InstrumentResult::pad(PadOutcome::from_score(Instrument::Fra, 0.8), "video-2", Utc::now()),
        verification(Instrument::Kd, 0.4, 1.5, "keys-2"),
    ];
    let report = build_trust_report("learner-1", "exam-43", spoofed, &fusion);
    println!(
        "replay attack:   fused {:.3} -> {:?} ({} flag: {} gated {:?})",
        report.fused_score,
        report.decision,
        report.pad_flags.len(),
        report.pad_flags[0].pad_instrument,
        report.pad_flags[0].gated_instrument,
    );

    // No usable evidence at all.
    let report = build_trust_report("learner-1", "exam-44", vec![], &fusion);
    println!("empty activity:  fused {:.3} -> {:?}", report.fused_score, report.decision);

    println!("\nfull report JSON:\n{}", serde_json::to_string_pretty(&report).unwrap());
}
