//! Face presentation-attack detection: 18 image-quality measures per frame
//! against a low-pass reference, a linear classifier trained on bona fide
//! vs. recaptured frames, and median aggregation over a presentation.
//!
//! Run with: `cargo run --release --example face_spoof_detection`

use eauth::eval::{simulate_recapture_face, SyntheticFaceProfile};
use eauth::pad::face::{classify_face_pad, train_pad_classifier, PadLabel};
use eauth::pad::iqm::{compute_iqms, lowpass_reference, IQM_NAMES};

fn main() {
    let ref_sigma = 0.5;

    println!("building a labeled corpus of 40 bona fide + 40 recaptured frames...");
    let mut training = Vec::new();
    for i in 0..40u64 {
        let bona = SyntheticFaceProfile::new(100 + i, 32).frame(i);
        let attack = simulate_recapture_face(&bona, 900 + i);
        for (img, label) in [(bona, PadLabel::BonaFide), (attack, PadLabel::Attack)] {
            let reference = lowpass_reference(&img, ref_sigma);
            training.push((compute_iqms(&img, &reference).unwrap(), label));
        }
    }

    let model = train_pad_classifier(&training, 300, 0.5, 0, ref_sigma).unwrap();
    let heaviest = model
        .weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    println!(
        "trained linear PAD model; most informative measure: {} (weight {:+.3})",
        IQM_NAMES[heaviest.0], heaviest.1
    );

    // Held-out presentations, several frames each.
    for (label, attack) in [("bona fide", false), ("recaptured", true)] {
        let identity = SyntheticFaceProfile::new(7_777, 32);
        let frames: Vec<_> = (0..5)
            .map(|i| {
                let f = identity.frame(500 + i);
                if attack {
                    simulate_recapture_face(&f, 600 + i)
                } else {
                    f
                }
            })
            .collect();
        let outcome = classify_face_pad(&model, &frames).unwrap();
        println!(
            "{label:>10} presentation: median score {:+.2} -> {:?}",
            outcome.score, outcome.decision
        );
    }
}
