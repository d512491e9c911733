//! Multi-instrument biometric e-authentication engine.
//!
//! Three verification instruments (voice, face, keystroke dynamics), two
//! presentation-attack detectors (face recapture, voice replay), a trust
//! engine that gates verification evidence by PAD and fuses it into a
//! per-activity trust report, a persistent enrollment registry, a synthetic
//! evaluation harness, and an HTTP service surface.
//!
//! Start from the runnable programs in `examples/` (one per major
//! capability) or from [`engine::Engine`], which wires everything together
//! over a data directory.

pub mod audio;
pub mod config;
pub mod digest;
pub mod engine;
pub mod eval;
pub mod face;
pub mod gmm;
pub mod keystroke;
pub mod pad;
pub mod registry;
pub mod service;
pub mod speaker;
pub mod trust;
pub mod types;

pub use types::{
    Instrument, InstrumentKind, Modality, PadDecision, PadOutcome, VerificationOutcome,
};
