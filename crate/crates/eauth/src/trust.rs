//! Trust engine: collects per-instrument outcomes for one assessment
//! activity, drops verification evidence whose sample was flagged by the
//! paired PAD instrument, and fuses the remainder into a trust report.
//!
//! Any PAD attack flag forces the report to `untrusted` regardless of how
//! well the surviving instruments scored.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::types::{Instrument, InstrumentKind, PadDecision, PadOutcome, VerificationOutcome};

/// Report schema version embedded in every serialized TrustReport.
pub const TRUST_REPORT_SCHEMA: u32 = 1;

/// One instrument's outcome for a sample presented during an activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentResult {
    pub instrument: Instrument,
    pub kind: InstrumentKind,
    pub outcome: Outcome,
    /// Content address of the sample this outcome was computed from.
    pub sample_ref: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Outcome {
    Verification(VerificationOutcome),
    Pad(PadOutcome),
}

impl InstrumentResult {
    pub fn verification(
        outcome: VerificationOutcome,
        sample_ref: &str,
        at: DateTime<Utc>,
    ) -> InstrumentResult {
        InstrumentResult {
            instrument: outcome.instrument,
            kind: InstrumentKind::Verification,
            outcome: Outcome::Verification(outcome),
            sample_ref: sample_ref.to_string(),
            at,
        }
    }

    pub fn pad(outcome: PadOutcome, sample_ref: &str, at: DateTime<Utc>) -> InstrumentResult {
        InstrumentResult {
            instrument: outcome.instrument,
            kind: InstrumentKind::Pad,
            outcome: Outcome::Pad(outcome),
            sample_ref: sample_ref.to_string(),
            at,
        }
    }
}

/// Record of a PAD attack decision, noting the verification instrument it
/// gated out (if its sample was shared with one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadFlag {
    pub pad_instrument: Instrument,
    pub sample_ref: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gated_instrument: Option<Instrument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustDecision {
    // Ordering: untrusted < inconclusive < trusted.
    Untrusted,
    Inconclusive,
    Trusted,
}

/// Fusion parameters: per-instrument weights (renormalized over whatever
/// instruments are actually present), the trusted-score threshold, and the
/// minimum number of usable verification results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub weights: BTreeMap<Instrument, f64>,
    pub trust_threshold: f64,
    pub min_instruments: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(Instrument::Fr, 1.0);
        weights.insert(Instrument::Vr, 1.0);
        weights.insert(Instrument::Kd, 1.0);
        FusionConfig {
            weights,
            trust_threshold: 0.6,
            min_instruments: 1,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.weights.values().all(|&w| w <= 0.0) {
            return Err("fusion config needs at least one positive weight".into());
        }
        if self.weights.values().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err("fusion weights must be finite and non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.trust_threshold) {
            return Err("trust_threshold must be in [0, 1]".into());
        }
        Ok(())
    }
}

/// Fused, PAD-gated authentication evidence for one activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustReport {
    pub schema: u32,
    pub identity: String,
    pub activity_id: String,
    pub results: Vec<InstrumentResult>,
    pub fused_score: f64,
    pub pad_flags: Vec<PadFlag>,
    pub decision: TrustDecision,
}

/// Splits results into verification evidence that survives PAD gating and
/// the attack flags raised.
///
/// A verification result is dropped when a PAD result from its paired
/// anti-spoofing instrument carries an attack decision for the same
/// `sample_ref`. KD has no PAD counterpart and always survives. Every PAD
/// attack decision raises a flag, paired or not.
pub fn gate_by_pad(results: &[InstrumentResult]) -> (Vec<InstrumentResult>, Vec<PadFlag>) {
    let attacks: Vec<&InstrumentResult> = results
        .iter()
        .filter(|r| {
            matches!(
                &r.outcome,
                Outcome::Pad(p) if p.decision == PadDecision::Attack
            )
        })
        .collect();

    let mut flags: Vec<PadFlag> = Vec::new();
    let mut kept = Vec::new();
    for r in results {
        let Outcome::Verification(_) = &r.outcome else {
            continue;
        };
        let gating_pad = r.instrument.pad_counterpart().and_then(|pad| {
            attacks
                .iter()
                .find(|a| a.instrument == pad && a.sample_ref == r.sample_ref)
        });
        match gating_pad {
            Some(pad_result) => flags.push(PadFlag {
                pad_instrument: pad_result.instrument,
                sample_ref: r.sample_ref.clone(),
                gated_instrument: Some(r.instrument),
            }),
            None => kept.push(r.clone()),
        }
    }

    // Attack decisions that gated nothing still count as fraud evidence.
    for a in &attacks {
        let already = flags
            .iter()
            .any(|f| f.pad_instrument == a.instrument && f.sample_ref == a.sample_ref);
        if !already {
            flags.push(PadFlag {
                pad_instrument: a.instrument,
                sample_ref: a.sample_ref.clone(),
                gated_instrument: None,
            });
        }
    }

    (kept, flags)
}

/// Maps an instrument's raw verification score onto `[0, 1]`.
///
/// FR and VR scores are cosine-based, mapped by `(s + 1) / 2` and clipped;
/// the KD score is a non-negative distance, mapped by `exp(-d)`.
pub fn calibrate_score(instrument: Instrument, score: f64) -> f64 {
    match instrument {
        Instrument::Fr | Instrument::Vr => ((score + 1.0) / 2.0).clamp(0.0, 1.0),
        Instrument::Kd => (-score.max(0.0)).exp(),
        Instrument::Fra | Instrument::Vra => 0.0, // PAD results never enter fusion
    }
}

/// Weighted-sum fusion over the kept verification results.
///
/// Weights are renormalized over the results present; `inconclusive` when
/// fewer than `min_instruments` results survive gating.
pub fn fuse(kept: &[InstrumentResult], cfg: &FusionConfig) -> (f64, TrustDecision) {
    let scored: Vec<(f64, f64)> = kept
        .iter()
        .filter_map(|r| match &r.outcome {
            Outcome::Verification(v) => {
                let w = cfg.weights.get(&r.instrument).copied().unwrap_or(0.0);
                (w > 0.0).then(|| (w, calibrate_score(r.instrument, v.score)))
            }
            Outcome::Pad(_) => None,
        })
        .collect();

    if scored.len() < cfg.min_instruments.max(1) {
        return (0.0, TrustDecision::Inconclusive);
    }
    let total_w: f64 = scored.iter().map(|(w, _)| w).sum();
    let fused: f64 = scored.iter().map(|(w, s)| w * s).sum::<f64>() / total_w;
    let decision = if fused >= cfg.trust_threshold {
        TrustDecision::Trusted
    } else {
        TrustDecision::Untrusted
    };
    (fused, decision)
}

/// Gate, fuse, and assemble the report. Any PAD flag forces `untrusted`.
pub fn build_trust_report(
    identity: &str,
    activity_id: &str,
    results: Vec<InstrumentResult>,
    cfg: &FusionConfig,
) -> TrustReport {
    let (kept, pad_flags) = gate_by_pad(&results);
    let (fused_score, mut decision) = fuse(&kept, cfg);
    if !pad_flags.is_empty() {
        decision = TrustDecision::Untrusted;
    }
    TrustReport {
        schema: TRUST_REPORT_SCHEMA,
        identity: identity.to_string(),
        activity_id: activity_id.to_string(),
        results,
        fused_score,
        pad_flags,
        decision,
    }
}
