//! Keystroke dynamics: build a typing model from an enrollment stream, then
//! score short probes with the scaled Manhattan distance over dwell and
//! flight features.
//!
//! Run with: `cargo run --example keystroke_verification`

use eauth::eval::{synth_typing, SyntheticTypistProfile};
use eauth::keystroke::{build_typing_model, extract_features, score_typing};

fn main() {
    let typists = SyntheticTypistProfile::separated_population(2, 42);

    // Full enrollment: 750 keystrokes from typist 0.
    let enrollment = synth_typing(&typists[0], 750, 1);
    let model = build_typing_model(&enrollment, 750).unwrap();
    println!(
        "typing model: {} keys, {} pairs, mean dwell {:.0} ms",
        model.per_key_dwell.len(),
        model.per_pair_flight.len(),
        model.global_dwell.mean
    );

    // 150-keystroke probes, as a quick re-verification mid-session would use.
    let threshold = 1.5;
    for (label, profile, seed) in [
        ("genuine", &typists[0], 10u64),
        ("genuine", &typists[0], 11),
        ("impostor", &typists[1], 12),
    ] {
        let probe = extract_features(&synth_typing(profile, 150, seed)).unwrap();
        let outcome = score_typing(&model, &probe, threshold).unwrap();
        println!(
            "{label:>9}: distance {:.3} (threshold {threshold}) -> {}",
            outcome.score,
            if outcome.accepted { "ACCEPT" } else { "REJECT" }
        );
    }
}
