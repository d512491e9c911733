//! Voice verification end to end: train background models on a synthetic
//! speaker population, enroll one speaker with multiple samples, then score
//! genuine and impostor probes by max cosine over enrollment i-vectors.
//!
//! Run with: `cargo run --release --example voice_verification`

use eauth::audio::FrontendConfig;
use eauth::eval::{synth_voice, SyntheticSpeakerProfile};
use eauth::speaker::{verify_against_templates, SpeakerBackground, SpeakerConfig};

fn main() {
    let frontend = FrontendConfig {
        sample_rate: 8_000,
        ..FrontendConfig::default()
    };
    // Desk-scale model sizes; production settings would use more mixture
    // components and a higher-dimensional subspace.
    let speaker_cfg = SpeakerConfig {
        ubm_components: 16,
        ubm_iters: 6,
        ivector_dim: 8,
        tv_iters: 3,
        threshold: 0.5,
        min_voiced_s: 1.0,
        ubm_max_frames: 100_000,
    };

    println!("synthesizing a 4-speaker population...");
    let speakers = SyntheticSpeakerProfile::disjoint_population(4, 8_000, 99);
    let corpus: Vec<_> = speakers
        .iter()
        .enumerate()
        .flat_map(|(i, p)| (0..4).map(move |u| synth_voice(p, 3.0, (i * 100 + u) as u64)))
        .collect();

    println!("training UBM + total-variability background models...");
    let background = SpeakerBackground::train(&corpus, &frontend, &speaker_cfg, 7).unwrap();

    println!("enrolling speaker 0 with three fresh utterances...");
    let enrolled: Vec<_> = (0..3)
        .map(|i| {
            let utterance = synth_voice(&speakers[0], 3.0, 5_000 + i);
            background
                .ivector_for(&utterance, &frontend, speaker_cfg.min_voiced_s, &format!("enroll-{i}"))
                .unwrap()
        })
        .collect();

    let check = |label: &str, profile: &SyntheticSpeakerProfile, seed: u64| {
        let probe = synth_voice(profile, 3.0, seed);
        let probe_iv = background
            .ivector_for(&probe, &frontend, speaker_cfg.min_voiced_s, label)
            .unwrap();
        let outcome =
            verify_against_templates(&probe_iv, &enrolled, speaker_cfg.threshold).unwrap();
        println!(
            "{label:>10}: score {:+.3} (threshold {:.2}) -> {}",
            outcome.score,
            outcome.threshold,
            if outcome.accepted { "ACCEPT" } else { "REJECT" }
        );
    };

    check("genuine", &speakers[0], 9_001);
    check("genuine", &speakers[0], 9_002);
    check("impostor", &speakers[1], 9_003);
    check("impostor", &speakers[3], 9_004);
}
