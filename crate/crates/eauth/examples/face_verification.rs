//! Face verification with the built-in toy embedding extractor: enroll from
//! a frame sequence, verify per-frame with max cosine against the
//! enrollment templates, accept on the valid-frame fraction.
//!
//! Run with: `cargo run --release --example face_verification`

use eauth::eval::SyntheticFaceProfile;
use eauth::face::{enroll_face_embeddings, verify_face_frames, FaceConfig, ToyEmbedding};

fn main() {
    let cfg = FaceConfig::default();

    // A 6-second enrollment video at 10 fps for identity A.
    let identity_a = SyntheticFaceProfile::new(1, 48);
    let identity_b = SyntheticFaceProfile::new(2, 48);
    let enroll_frames = identity_a.frames(60, 0);
    let templates = enroll_face_embeddings(&enroll_frames, 10.0, &cfg, &ToyEmbedding).unwrap();
    println!(
        "enrolled identity A: {} templates from {} frames ({} per second)",
        templates.len(),
        enroll_frames.len(),
        cfg.enroll_samples_per_s
    );

    for (label, profile) in [("genuine", &identity_a), ("impostor", &identity_b)] {
        let probe = profile.frames(6, 900);
        let outcome = verify_face_frames(&probe, &templates, &cfg, &ToyEmbedding).unwrap();
        println!(
            "{label:>9}: {:.0}% of frames valid (per-frame threshold {:.2}) -> {}",
            100.0 * outcome.score,
            outcome.threshold,
            if outcome.accepted { "ACCEPT" } else { "REJECT" }
        );
        let best = outcome
            .per_scores
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        println!("           best frame cosine {best:+.3}");
    }
}
