//! Voice presentation-attack detection: a one-class GMM over MFCC+delta
//! frames of bona fide speech. Probes whose average per-frame log
//! likelihood falls below a calibrated threshold are flagged as attacks
//! (replay being the expected channel).

use serde::{Deserialize, Serialize};

use super::PadError;
use crate::audio::{self, AudioBuffer, FrontendConfig};
use crate::gmm::{train_diag_gmm, DiagGmm};
use crate::types::{Instrument, PadOutcome};

/// One-class GMM with its operating threshold (average log likelihood per
/// frame) and the digest of the front-end that produced its features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccGmm {
    pub gmm: DiagGmm,
    pub score_threshold: f64,
    pub frontend_digest: String,
}

/// Linear-interpolation percentile of an unsorted slice, `p` in `[0, 100]`.
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

/// Trains the one-class model on bona fide samples only.
///
/// The threshold starts at the 5th percentile of per-sample average log
/// likelihood over the training data, so roughly 95% of bona fide training
/// samples score positive; recalibrate against a target BPCER as needed.
pub fn train_occ(
    bona_fide: &[AudioBuffer],
    frontend: &FrontendConfig,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<OccGmm, PadError> {
    let mut pooled: Vec<Vec<f64>> = Vec::new();
    let mut per_sample: Vec<Vec<Vec<f64>>> = Vec::new();
    for buf in bona_fide {
        let (m, _) = audio::voiced_mfcc(buf, frontend)?;
        per_sample.push(m.frames().to_vec());
        pooled.extend(m.frames().iter().cloned());
    }
    let gmm = train_diag_gmm(&pooled, k, iters, seed)?;

    let avg_lls: Vec<f64> = per_sample
        .iter()
        .map(|frames| gmm.avg_log_likelihood(frames))
        .collect::<Result<_, _>>()?;
    let score_threshold = percentile(&avg_lls, 5.0);

    Ok(OccGmm {
        gmm,
        score_threshold,
        frontend_digest: frontend.digest(),
    })
}

/// Scores a probe: `avg per-frame log likelihood - threshold`, bona fide
/// exactly when positive. Rejects probes produced by a different front-end
/// configuration.
pub fn score_voice_pad(
    model: &OccGmm,
    probe: &AudioBuffer,
    frontend: &FrontendConfig,
) -> Result<PadOutcome, PadError> {
    if model.frontend_digest != frontend.digest() {
        return Err(PadError::DigestMismatch);
    }
    let (features, _) = audio::voiced_mfcc(probe, frontend)?;
    let avg_ll = model.gmm.avg_log_likelihood(features.frames())?;
    Ok(PadOutcome::from_score(
        Instrument::Vra,
        avg_ll - model.score_threshold,
    ))
}
