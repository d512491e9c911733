//! Evaluation harness: synthetic populations, attack simulation, error-rate
//! metrics, and per-instrument evaluation runners used for acceptance
//! testing and threshold calibration.

pub mod metrics;
pub mod runners;
pub mod synth;

pub use metrics::{
    calibrate_threshold, compute_acer, sweep_thresholds, CalibrationTarget, DetPoint, ErrorRates,
    EvalError, SweepResult,
};
pub use runners::{
    evaluate_fr, evaluate_fra, evaluate_kd, evaluate_vr, evaluate_vra, EvaluationReport,
    FrEvalOptions, FraEvalOptions, KdEvalOptions, VrEvalOptions, VraEvalOptions,
};
pub use synth::{
    simulate_recapture_face, simulate_replay_voice, synth_typing, synth_voice, trial_seed,
    FormantPeak, SyntheticFaceProfile, SyntheticSpeakerProfile, SyntheticTypistProfile,
};
