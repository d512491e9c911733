//! Error-rate methodology: threshold sweeps, EER, DET points, ACER, and
//! threshold calibration, shown on a full keystroke evaluation plus a tiny
//! hand-made score set.
//!
//! Run with: `cargo run --release --example error_rates`

use eauth::eval::{
    calibrate_threshold, compute_acer, evaluate_kd, sweep_thresholds, CalibrationTarget,
    KdEvalOptions,
};
use eauth::types::PadDecision;

fn main() {
    // Hand-made scores first: sweep every distinct score as a threshold.
    let genuine = [0.9, 0.8, 0.75, 0.6, 0.3];
    let impostor = [0.55, 0.4, 0.35, 0.2, 0.1];
    let sweep = sweep_thresholds(&genuine, &impostor).unwrap();
    println!(
        "toy sweep: EER {:.2} at threshold {:.2} (FAR {:.2} / FRR {:.2})",
        sweep.rates.eer, sweep.eer_threshold, sweep.rates.far, sweep.rates.frr
    );
    for point in sweep.det.iter().take(4) {
        println!("  t={:.2}  FAR={:.2}  FRR={:.2}", point.threshold, point.far, point.frr);
    }

    let strict = calibrate_threshold(&genuine, &impostor, CalibrationTarget::FarAt, 0.0).unwrap();
    println!("threshold for FAR = 0: {strict:.2} (the maximum impostor score)");

    // PAD-style rates from decisions.
    let attacks = [PadDecision::Attack, PadDecision::Attack, PadDecision::BonaFide];
    let bona = [PadDecision::BonaFide, PadDecision::BonaFide, PadDecision::Attack];
    let rates = compute_acer(&attacks, &bona).unwrap();
    println!(
        "PAD rates: APCER {:.2}, BPCER {:.2}, ACER {:.2}",
        rates.apcer.unwrap(),
        rates.bpcer.unwrap(),
        rates.acer.unwrap()
    );

    // A real instrument evaluation: 20 synthetic typists, 750-keystroke
    // enrollment, 150-keystroke probes.
    println!("\nrunning the keystroke evaluation (20 typists)...");
    let report = evaluate_kd(&KdEvalOptions::default()).unwrap();
    println!(
        "KD: {} genuine / {} impostor trials, EER {:.4}",
        report.n_genuine, report.n_impostor, report.eer
    );
    println!("DET curve in CSV form (first lines):");
    for line in report.det_csv().lines().take(5) {
        println!("  {line}");
    }
}
