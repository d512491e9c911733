//! Voice verification: total-variability modeling over GMM-UBM statistics,
//! i-vector extraction, and cosine-similarity scoring against enrollment
//! templates.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioBuffer, AudioError, FrontendConfig};
use crate::gmm::{accumulate_bw_stats, BaumWelchStats, DiagGmm, GmmError};
use crate::types::{Instrument, VerificationOutcome};

#[derive(Debug, Error)]
pub enum SpeakerError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("linear system is singular even after regularization")]
    SingularSystem,
    #[error("posterior covariance singular even after regularization")]
    SingularPosterior,
    #[error("not enough voiced speech: {voiced_s:.2} s, need {needed_s:.2} s")]
    InsufficientSpeech { voiced_s: f64, needed_s: f64 },
    #[error("model digest mismatch: {context}")]
    DigestMismatch { context: String },
    #[error("identity has no voice enrollment templates")]
    NotEnrolled,
}

/// Low-rank total-variability subspace over UBM supervector offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TvWire", try_from = "TvWire")]
pub struct TotalVariabilityModel {
    /// (K * D) x R matrix, rows ordered component-major.
    t: DMatrix<f64>,
    ubm_digest: String,
}

#[derive(Serialize, Deserialize)]
struct TvWire {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    ubm_digest: String,
}

impl From<TotalVariabilityModel> for TvWire {
    fn from(m: TotalVariabilityModel) -> TvWire {
        let (rows, cols) = (m.t.nrows(), m.t.ncols());
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(m.t[(r, c)]);
            }
        }
        TvWire {
            rows,
            cols,
            data,
            ubm_digest: m.ubm_digest,
        }
    }
}

impl TryFrom<TvWire> for TotalVariabilityModel {
    type Error = String;

    fn try_from(w: TvWire) -> Result<TotalVariabilityModel, String> {
        if w.data.len() != w.rows * w.cols {
            return Err("total-variability matrix size mismatch".into());
        }
        Ok(TotalVariabilityModel {
            t: DMatrix::from_row_slice(w.rows, w.cols, &w.data),
            ubm_digest: w.ubm_digest,
        })
    }
}

impl TotalVariabilityModel {
    pub fn new(t: DMatrix<f64>, ubm_digest: String) -> TotalVariabilityModel {
        TotalVariabilityModel { t, ubm_digest }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn rank(&self) -> usize {
        self.t.ncols()
    }

    pub fn ubm_digest(&self) -> &str {
        &self.ubm_digest
    }
}

/// Utterance embedding in the total-variability subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IVector {
    pub w: Vec<f64>,
    /// Blob id of the sample this vector was extracted from.
    pub source_sample: String,
}

fn cholesky_solve_regularized(
    mut a: DMatrix<f64>,
    b: &DVector<f64>,
    ridge: f64,
) -> Result<DVector<f64>, SpeakerError> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => {
            for i in 0..a.nrows() {
                a[(i, i)] += ridge;
            }
            a.cholesky()
                .map(|ch| ch.solve(b))
                .ok_or(SpeakerError::SingularSystem)
        }
    }
}

/// Precomputed quantities for repeated i-vector extraction under one
/// (UBM, T) pair.
pub struct IvectorExtractor<'a> {
    ubm: &'a DiagGmm,
    tv: &'a TotalVariabilityModel,
    /// T scaled row-wise by 1/sigma^2, i.e. Sigma^{-1} T.
    weighted_t: DMatrix<f64>,
    /// Per-component R x R Gram blocks T_k' Sigma_k^{-1} T_k.
    grams: Vec<DMatrix<f64>>,
}

impl<'a> IvectorExtractor<'a> {
    pub fn new(
        ubm: &'a DiagGmm,
        tv: &'a TotalVariabilityModel,
    ) -> Result<IvectorExtractor<'a>, SpeakerError> {
        if tv.ubm_digest() != ubm.digest() {
            return Err(SpeakerError::DigestMismatch {
                context: "total-variability model was trained on a different UBM".into(),
            });
        }
        let (k, d) = (ubm.num_components(), ubm.dim());
        let r = tv.rank();
        if tv.t.nrows() != k * d {
            return Err(SpeakerError::DimensionMismatch {
                context: format!("T has {} rows, UBM implies {}", tv.t.nrows(), k * d),
            });
        }
        let mut weighted_t = tv.t.clone();
        for c in 0..k {
            for i in 0..d {
                let row = c * d + i;
                let inv_var = 1.0 / ubm.variances[c][i];
                for j in 0..r {
                    weighted_t[(row, j)] *= inv_var;
                }
            }
        }
        let grams = (0..k)
            .map(|c| {
                let t_k = tv.t.rows(c * d, d);
                let wt_k = weighted_t.rows(c * d, d);
                t_k.transpose() * wt_k
            })
            .collect();
        Ok(IvectorExtractor {
            ubm,
            tv,
            weighted_t,
            grams,
        })
    }

    /// Posterior-mean i-vector:
    /// `w = (I + T' S^{-1} N T)^{-1} T' S^{-1} F`, with N expanded
    /// block-diagonally over components and S the UBM variances.
    pub fn extract(
        &self,
        stats: &BaumWelchStats,
        source_sample: &str,
    ) -> Result<IVector, SpeakerError> {
        let (k, d) = (self.ubm.num_components(), self.ubm.dim());
        let r = self.tv.rank();
        if stats.n.len() != k || stats.f.len() != k || stats.f.iter().any(|f| f.len() != d) {
            return Err(SpeakerError::DimensionMismatch {
                context: "Baum-Welch stats do not match the UBM layout".into(),
            });
        }
        let mut precision = DMatrix::<f64>::identity(r, r);
        for (c, gram) in self.grams.iter().enumerate() {
            precision += gram * stats.n[c];
        }
        let mut rhs = DVector::<f64>::zeros(r);
        for c in 0..k {
            let wt_k = self.weighted_t.rows(c * d, d);
            let f_k = DVector::from_column_slice(&stats.f[c]);
            rhs += wt_k.transpose() * f_k;
        }
        let w = cholesky_solve_regularized(precision, &rhs, 1e-10)?;
        Ok(IVector {
            w: w.iter().cloned().collect(),
            source_sample: source_sample.to_string(),
        })
    }
}

pub fn extract_ivector(
    stats: &BaumWelchStats,
    ubm: &DiagGmm,
    tv: &TotalVariabilityModel,
    source_sample: &str,
) -> Result<IVector, SpeakerError> {
    IvectorExtractor::new(ubm, tv)?.extract(stats, source_sample)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on ChaCha draws keeps init reproducible across platforms.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// EM estimation of the total-variability matrix from per-utterance
/// Baum-Welch statistics.
///
/// Initialization is seeded random scaled by `0.1 * sqrt(variance)` of the
/// corresponding UBM dimension; `iters == 0` returns that seed matrix
/// unchanged. Fewer than `rank` utterances logs a warning but still trains.
pub fn train_tv_matrix(
    stats_set: &[BaumWelchStats],
    ubm: &DiagGmm,
    rank: usize,
    iters: usize,
    seed: u64,
) -> Result<TotalVariabilityModel, SpeakerError> {
    assert!(rank >= 1, "rank must be >= 1");
    let (k, d) = (ubm.num_components(), ubm.dim());
    if stats_set.len() < rank {
        log::warn!(
            "training total-variability rank {} from only {} utterances",
            rank,
            stats_set.len()
        );
    }
    for s in stats_set {
        if s.n.len() != k || s.f.len() != k {
            return Err(SpeakerError::DimensionMismatch {
                context: "stats set does not match UBM".into(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = DMatrix::<f64>::zeros(k * d, rank);
    for c in 0..k {
        for i in 0..d {
            let scale = 0.1 * ubm.variances[c][i].sqrt();
            for j in 0..rank {
                t[(c * d + i, j)] = scale * standard_normal(&mut rng);
            }
        }
    }

    for _ in 0..iters {
        let model = TotalVariabilityModel::new(t.clone(), ubm.digest());
        let extractor = IvectorExtractor::new(ubm, &model)?;

        // E-step: posterior mean and second moment of w per utterance.
        let mut a: Vec<DMatrix<f64>> = vec![DMatrix::zeros(rank, rank); k];
        let mut c_acc: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, rank); k];
        for stats in stats_set {
            let mut precision = DMatrix::<f64>::identity(rank, rank);
            for (c, gram) in extractor.grams.iter().enumerate() {
                precision += gram * stats.n[c];
            }
            let mut rhs = DVector::<f64>::zeros(rank);
            for c in 0..k {
                let wt_k = extractor.weighted_t.rows(c * d, d);
                rhs += wt_k.transpose() * DVector::from_column_slice(&stats.f[c]);
            }
            let chol = match precision.clone().cholesky() {
                Some(ch) => ch,
                None => {
                    let mut reg = precision.clone();
                    for i in 0..rank {
                        reg[(i, i)] += 1e-6;
                    }
                    reg.cholesky().ok_or(SpeakerError::SingularPosterior)?
                }
            };
            let cov = chol.inverse();
            let ew = &cov * rhs;
            let eww = cov + &ew * ew.transpose();

            for c in 0..k {
                a[c] += &eww * stats.n[c];
                let f_k = DVector::from_column_slice(&stats.f[c]);
                c_acc[c] += f_k * ew.transpose();
            }
        }

        // M-step: per component solve A_k X = C_k' and set T_k = X'.
        for c in 0..k {
            let rhs = c_acc[c].transpose();
            let solved = match a[c].clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => {
                    let mut reg = a[c].clone();
                    for i in 0..rank {
                        reg[(i, i)] += 1e-6;
                    }
                    reg.cholesky()
                        .ok_or(SpeakerError::SingularPosterior)?
                        .solve(&rhs)
                }
            };
            let t_k = solved.transpose();
            for i in 0..d {
                for j in 0..rank {
                    t[(c * d + i, j)] = t_k[(i, j)];
                }
            }
        }
    }

    Ok(TotalVariabilityModel::new(t, ubm.digest()))
}

/// `a . b / (|a| |b|)`, defined as 0 when either norm is below 1e-12.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, SpeakerError> {
    if a.len() != b.len() {
        return Err(SpeakerError::DimensionMismatch {
            context: format!("cosine over {} vs {} dims", a.len(), b.len()),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Voice instrument parameters. Thresholds are configuration, expected to be
/// calibrated against a synthetic development set rather than hardcoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeakerConfig {
    pub ubm_components: usize,
    pub ubm_iters: usize,
    pub ivector_dim: usize,
    pub tv_iters: usize,
    pub threshold: f64,
    /// Minimum voiced speech required of any enrollment or probe sample.
    pub min_voiced_s: f64,
    /// UBM training pools at most this many frames (deterministic stride
    /// subsampling above the cap).
    pub ubm_max_frames: usize,
}

impl Default for SpeakerConfig {
    fn default() -> Self {
        SpeakerConfig {
            ubm_components: 32,
            ubm_iters: 10,
            ivector_dim: 400,
            tv_iters: 5,
            threshold: 0.5,
            min_voiced_s: 2.0,
            ubm_max_frames: 100_000,
        }
    }
}

/// Trained background models for the voice channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerBackground {
    pub ubm: DiagGmm,
    pub tv: TotalVariabilityModel,
    pub frontend_digest: String,
}

impl SpeakerBackground {
    /// Trains UBM and total-variability matrix from a corpus of utterances.
    pub fn train(
        utterances: &[AudioBuffer],
        frontend: &FrontendConfig,
        cfg: &SpeakerConfig,
        seed: u64,
    ) -> Result<SpeakerBackground, SpeakerError> {
        let mut pooled: Vec<Vec<f64>> = Vec::new();
        let mut per_utt: Vec<Vec<Vec<f64>>> = Vec::new();
        for buf in utterances {
            let (m, _) = audio::voiced_mfcc(buf, frontend)?;
            per_utt.push(m.frames().to_vec());
            pooled.extend(m.frames().iter().cloned());
        }
        if pooled.len() > cfg.ubm_max_frames {
            let stride = pooled.len().div_ceil(cfg.ubm_max_frames);
            pooled = pooled.into_iter().step_by(stride).collect();
        }
        let ubm = crate::gmm::train_diag_gmm(&pooled, cfg.ubm_components, cfg.ubm_iters, seed)?;
        let stats: Result<Vec<BaumWelchStats>, GmmError> = per_utt
            .iter()
            .map(|frames| accumulate_bw_stats(frames, &ubm))
            .collect();
        let tv = train_tv_matrix(&stats?, &ubm, cfg.ivector_dim, cfg.tv_iters, seed ^ 0x7)?;
        Ok(SpeakerBackground {
            ubm,
            tv,
            frontend_digest: frontend.digest(),
        })
    }

    fn check_frontend(&self, frontend: &FrontendConfig) -> Result<(), SpeakerError> {
        if self.frontend_digest != frontend.digest() {
            return Err(SpeakerError::DigestMismatch {
                context: "speaker background models trained with a different front-end".into(),
            });
        }
        Ok(())
    }

    /// i-vector of one utterance, enforcing the minimum voiced duration.
    pub fn ivector_for(
        &self,
        buf: &AudioBuffer,
        frontend: &FrontendConfig,
        min_voiced_s: f64,
        source_sample: &str,
    ) -> Result<IVector, SpeakerError> {
        self.check_frontend(frontend)?;
        let (features, voiced_s) = audio::voiced_mfcc(buf, frontend)?;
        if voiced_s < min_voiced_s {
            return Err(SpeakerError::InsufficientSpeech {
                voiced_s,
                needed_s: min_voiced_s,
            });
        }
        let stats = accumulate_bw_stats(features.frames(), &self.ubm)?;
        extract_ivector(&stats, &self.ubm, &self.tv, source_sample)
    }
}

/// Max-rule verification: best cosine over all enrollment i-vectors, accept
/// when it exceeds the threshold.
pub fn verify_against_templates(
    probe: &IVector,
    enrolled: &[IVector],
    threshold: f64,
) -> Result<VerificationOutcome, SpeakerError> {
    if enrolled.is_empty() {
        return Err(SpeakerError::NotEnrolled);
    }
    let mut per_scores = Vec::with_capacity(enrolled.len());
    for e in enrolled {
        per_scores.push(cosine_similarity(&probe.w, &e.w)?);
    }
    let score = per_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(VerificationOutcome {
        instrument: Instrument::Vr,
        score,
        threshold,
        accepted: score > threshold,
        per_scores,
    })
}

#[cfg(test)]
mod tests;
