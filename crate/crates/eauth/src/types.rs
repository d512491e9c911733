//! Shared domain types: modalities, instruments, and per-instrument outcomes.

use serde::{Deserialize, Serialize};

/// Biometric capture channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Voice,
    Face,
    Keystroke,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Voice => "voice",
            Modality::Face => "face",
            Modality::Keystroke => "keystroke",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        match s {
            "voice" => Some(Modality::Voice),
            "face" => Some(Modality::Face),
            "keystroke" => Some(Modality::Keystroke),
            _ => None,
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An authentication or anti-spoofing instrument.
///
/// `Fr`/`Vr`/`Kd` verify a claimed identity; `Fra`/`Vra` are the paired
/// presentation-attack detectors for the face and voice channels. Keystroke
/// has no PAD counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Fr,
    Vr,
    Kd,
    Fra,
    Vra,
}

/// Whether an instrument verifies identity or detects presentation attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrumentKind {
    Verification,
    Pad,
}

impl Instrument {
    pub fn as_str(self) -> &'static str {
        match self {
            Instrument::Fr => "fr",
            Instrument::Vr => "vr",
            Instrument::Kd => "kd",
            Instrument::Fra => "fra",
            Instrument::Vra => "vra",
        }
    }

    pub fn parse(s: &str) -> Option<Instrument> {
        match s {
            "fr" => Some(Instrument::Fr),
            "vr" => Some(Instrument::Vr),
            "kd" => Some(Instrument::Kd),
            "fra" => Some(Instrument::Fra),
            "vra" => Some(Instrument::Vra),
            _ => None,
        }
    }

    pub fn kind(self) -> InstrumentKind {
        match self {
            Instrument::Fr | Instrument::Vr | Instrument::Kd => InstrumentKind::Verification,
            Instrument::Fra | Instrument::Vra => InstrumentKind::Pad,
        }
    }

    pub fn modality(self) -> Modality {
        match self {
            Instrument::Fr | Instrument::Fra => Modality::Face,
            Instrument::Vr | Instrument::Vra => Modality::Voice,
            Instrument::Kd => Modality::Keystroke,
        }
    }

    /// PAD instrument that guards this verification instrument, if any.
    pub fn pad_counterpart(self) -> Option<Instrument> {
        match self {
            Instrument::Fr => Some(Instrument::Fra),
            Instrument::Vr => Some(Instrument::Vra),
            _ => None,
        }
    }
}

impl std::fmt::Display for Instrument {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of verifying a probe against a claimed identity.
///
/// Score semantics are instrument-specific: FR reports the fraction of probe
/// frames that matched, VR the best cosine similarity over enrollment
/// templates, KD a scaled distance (lower is a better match). `per_scores`
/// carries the underlying per-template (VR) or per-frame (FR) scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub instrument: Instrument,
    pub score: f64,
    pub threshold: f64,
    pub accepted: bool,
    #[serde(default)]
    pub per_scores: Vec<f64>,
}

/// Bona-fide vs. presentation-attack decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadDecision {
    BonaFide,
    Attack,
}

/// Outcome of a presentation-attack check. Higher score means more bona fide;
/// the decision is bona fide exactly when the score is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadOutcome {
    pub instrument: Instrument,
    pub decision: PadDecision,
    pub score: f64,
}

impl PadOutcome {
    /// Derives the decision from the score sign, keeping the
    /// `decision == BonaFide <=> score > 0` invariant.
    pub fn from_score(instrument: Instrument, score: f64) -> PadOutcome {
        let decision = if score > 0.0 {
            PadDecision::BonaFide
        } else {
            PadDecision::Attack
        };
        PadOutcome {
            instrument,
            decision,
            score,
        }
    }
}
