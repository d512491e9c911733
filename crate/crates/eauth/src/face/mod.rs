//! Face verification: pluggable embedding extraction over grayscale frames,
//! enrollment from frame sequences, and per-frame cosine matching.
//!
//! The embedding network itself is a seam: anything implementing
//! [`EmbeddingExtractor`] can back the instrument. [`ToyEmbedding`] is the
//! built-in stand-in that keeps the whole pipeline runnable without a
//! trained network.

pub mod pgm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::speaker::cosine_similarity;
use crate::types::{Instrument, VerificationOutcome};

#[derive(Debug, Error)]
pub enum FaceError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("malformed PGM payload: {0}")]
    MalformedPgm(String),
    #[error("too few frames: {got} cover {seconds:.2} s, policy requires {needed_s:.2} s")]
    TooFewFrames {
        got: usize,
        seconds: f64,
        needed_s: f64,
    },
    #[error("probe contains no frames")]
    EmptyProbe,
    #[error("identity has no face enrollment templates")]
    NotEnrolled,
    #[error("embedding dimension mismatch: enrolled {enrolled}, probe {probe}")]
    DimensionMismatch { enrolled: usize, probe: usize },
}

/// Grayscale frame with pixel values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameImage {
    width: usize,
    height: usize,
    /// Row-major pixels.
    pixels: Vec<f64>,
}

impl FrameImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<FrameImage, FaceError> {
        if width < 16 || height < 16 {
            return Err(FaceError::InvalidImage(format!(
                "image must be at least 16x16, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(FaceError::InvalidImage(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(FaceError::InvalidImage("non-finite pixel value".into()));
        }
        let pixels = pixels.into_iter().map(|p| p.clamp(0.0, 255.0)).collect();
        Ok(FrameImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Bilinear sample at fractional coordinates, clamped to the image.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Unit-norm face embedding tagged with the extractor that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceEmbedding {
    pub v: Vec<f64>,
    pub extractor_id: String,
}

/// The seam where a face embedding network plugs in. Implementations must be
/// deterministic: the same image always yields the same embedding.
pub trait EmbeddingExtractor: Send + Sync {
    fn extractor_id(&self) -> &str;
    fn embed(&self, img: &FrameImage) -> FaceEmbedding;
}

/// Stand-in extractor: bilinear-downsample to 16x16, remove the mean,
/// normalize to unit length (first basis vector when the image is constant).
#[derive(Debug, Clone, Default)]
pub struct ToyEmbedding;

pub const TOY_EMBED_ID: &str = "toy-16x16-v1";
pub const TOY_EMBED_DIM: usize = 256;

impl EmbeddingExtractor for ToyEmbedding {
    fn extractor_id(&self) -> &str {
        TOY_EMBED_ID
    }

    fn embed(&self, img: &FrameImage) -> FaceEmbedding {
        let side = 16usize;
        let mut v = Vec::with_capacity(side * side);
        for gy in 0..side {
            for gx in 0..side {
                // Sample at cell centers of a 16x16 grid over the image.
                let x = (gx as f64 + 0.5) / side as f64 * img.width() as f64 - 0.5;
                let y = (gy as f64 + 0.5) / side as f64 * img.height() as f64 - 0.5;
                v.push(img.sample_bilinear(x, y));
            }
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|p| *p -= mean);
        let norm = v.iter().map(|p| p * p).sum::<f64>().sqrt();
        if norm < 1e-12 {
            let mut basis = vec![0.0; side * side];
            basis[0] = 1.0;
            v = basis;
        } else {
            v.iter_mut().for_each(|p| *p /= norm);
        }
        FaceEmbedding {
            v,
            extractor_id: TOY_EMBED_ID.to_string(),
        }
    }
}

/// Face instrument parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceConfig {
    /// Per-frame cosine threshold for a frame to count as valid.
    pub threshold: f64,
    /// Fraction of valid frames required to accept the probe.
    pub min_valid_fraction: f64,
    /// Minimum video length for enrollment, seconds.
    pub min_enroll_s: f64,
    /// Embeddings sampled per second of enrollment video.
    pub enroll_samples_per_s: f64,
}

impl Default for FaceConfig {
    fn default() -> Self {
        FaceConfig {
            threshold: 0.5,
            min_valid_fraction: 0.5,
            min_enroll_s: 5.0,
            enroll_samples_per_s: 2.0,
        }
    }
}

/// Embeds every k-th frame of an enrollment video, `k = fps / samples_per_s`
/// (at least 1), after checking the video covers the policy minimum.
pub fn enroll_face_embeddings(
    frames: &[FrameImage],
    fps: f64,
    cfg: &FaceConfig,
    extractor: &dyn EmbeddingExtractor,
) -> Result<Vec<FaceEmbedding>, FaceError> {
    if fps <= 0.0 {
        return Err(FaceError::InvalidImage("fps must be positive".into()));
    }
    let seconds = frames.len() as f64 / fps;
    if seconds < cfg.min_enroll_s {
        return Err(FaceError::TooFewFrames {
            got: frames.len(),
            seconds,
            needed_s: cfg.min_enroll_s,
        });
    }
    let k = ((fps / cfg.enroll_samples_per_s).round() as usize).max(1);
    Ok(frames
        .iter()
        .step_by(k)
        .map(|f| extractor.embed(f))
        .collect())
}

/// Per-frame max-cosine verification.
///
/// Every probe frame is embedded and scored against all enrollment
/// templates; a frame is valid when its best cosine exceeds the per-frame
/// threshold. The outcome score is the valid fraction, accepted when it
/// reaches `min_valid_fraction`.
pub fn verify_face_frames(
    probe_frames: &[FrameImage],
    enrolled: &[FaceEmbedding],
    cfg: &FaceConfig,
    extractor: &dyn EmbeddingExtractor,
) -> Result<VerificationOutcome, FaceError> {
    if enrolled.is_empty() {
        return Err(FaceError::NotEnrolled);
    }
    if probe_frames.is_empty() {
        return Err(FaceError::EmptyProbe);
    }
    let mut per_scores = Vec::with_capacity(probe_frames.len());
    for frame in probe_frames {
        let emb = extractor.embed(frame);
        let mut best = f64::NEG_INFINITY;
        for e in enrolled {
            if e.v.len() != emb.v.len() {
                return Err(FaceError::DimensionMismatch {
                    enrolled: e.v.len(),
                    probe: emb.v.len(),
                });
            }
            let c = cosine_similarity(&emb.v, &e.v).expect("dims already checked");
            best = best.max(c);
        }
        per_scores.push(best);
    }
    let valid = per_scores.iter().filter(|&&s| s > cfg.threshold).count();
    let fraction = valid as f64 / per_scores.len() as f64;
    Ok(VerificationOutcome {
        instrument: Instrument::Fr,
        score: fraction,
        threshold: cfg.threshold,
        accepted: fraction >= cfg.min_valid_fraction,
        per_scores,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn synthetic_image(seed: u64, size: usize) -> FrameImage {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut px = vec![0.0; size * size];
        // Smooth ramp plus a few rectangles gives distinctive structure.
        for y in 0..size {
            for x in 0..size {
                px[y * size + x] = 40.0 + 100.0 * (x as f64 / size as f64);
            }
        }
        for _ in 0..6 {
            let x0 = rng.random_range(0..size - 4);
            let y0 = rng.random_range(0..size - 4);
            let w = rng.random_range(2..size - x0);
            let h = rng.random_range(2..size - y0);
            let val: f64 = rng.random_range(0.0..255.0);
            for y in y0..(y0 + h).min(size) {
                for x in x0..(x0 + w).min(size) {
                    px[y * size + x] = val;
                }
            }
        }
        FrameImage::new(size, size, px).unwrap()
    }

    #[test]
    fn constant_image_falls_back_to_basis_vector() {
        let img = FrameImage::new(32, 32, vec![127.0; 1024]).unwrap();
        let emb = ToyEmbedding.embed(&img);
        assert_eq!(emb.v.len(), TOY_EMBED_DIM);
        assert_eq!(emb.v[0], 1.0);
        assert!(emb.v[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embeddings_are_unit_norm() {
        for seed in 0..5 {
            let emb = ToyEmbedding.embed(&synthetic_image(seed, 40));
            let norm: f64 = emb.v.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn brightness_offset_cancels_out() {
        // Scale down first so +10 never saturates at 255.
        let base = synthetic_image(3, 32);
        let img =
            FrameImage::new(32, 32, base.pixels().iter().map(|p| p * 0.8).collect()).unwrap();
        let brighter =
            FrameImage::new(32, 32, img.pixels().iter().map(|p| p + 10.0).collect()).unwrap();
        let a = ToyEmbedding.embed(&img);
        let b = ToyEmbedding.embed(&brighter);
        for (x, y) in a.v.iter().zip(&b.v) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn enrollment_counting_oracle() {
        // 7 s at 10 fps with 2 samples/s: k = 5, ceil(70 / 5) = 14 templates.
        let frames: Vec<FrameImage> = (0..70).map(|i| synthetic_image(i, 24)).collect();
        let embs =
            enroll_face_embeddings(&frames, 10.0, &FaceConfig::default(), &ToyEmbedding).unwrap();
        assert_eq!(embs.len(), 14);
    }

    #[test]
    fn short_video_is_rejected() {
        let frames: Vec<FrameImage> = (0..10).map(|i| synthetic_image(i, 24)).collect();
        match enroll_face_embeddings(&frames, 10.0, &FaceConfig::default(), &ToyEmbedding) {
            Err(FaceError::TooFewFrames { got: 10, .. }) => {}
            other => panic!("expected TooFewFrames, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_frames_give_duplicate_embeddings() {
        let img = synthetic_image(9, 24);
        let a = ToyEmbedding.embed(&img);
        let b = ToyEmbedding.embed(&img);
        assert_eq!(a, b);
    }

    #[test]
    fn identical_probe_accepts_with_all_frames_valid() {
        let frames: Vec<FrameImage> = (0..60).map(|i| synthetic_image(i, 24)).collect();
        let cfg = FaceConfig::default();
        let enrolled = enroll_face_embeddings(&frames, 10.0, &cfg, &ToyEmbedding).unwrap();
        // Probe with the exact frames that were embedded at enrollment.
        let probe: Vec<FrameImage> = frames.iter().step_by(5).cloned().collect();
        let out = verify_face_frames(&probe, &enrolled, &cfg, &ToyEmbedding).unwrap();
        assert_eq!(out.score, 1.0);
        assert!(out.accepted);
        assert!(out.per_scores.iter().all(|&s| (s - 1.0).abs() < 1e-9));
    }

    #[test]
    fn disjoint_probe_is_rejected() {
        let enroll_frames: Vec<FrameImage> = (0..60).map(|i| synthetic_image(i, 24)).collect();
        let cfg = FaceConfig {
            threshold: 0.9,
            ..FaceConfig::default()
        };
        let enrolled =
            enroll_face_embeddings(&enroll_frames, 10.0, &cfg, &ToyEmbedding).unwrap();
        let probe: Vec<FrameImage> = (1000..1010).map(|i| synthetic_image(i, 24)).collect();
        let out = verify_face_frames(&probe, &enrolled, &cfg, &ToyEmbedding).unwrap();
        assert!(!out.accepted);
    }

    #[test]
    fn exactly_half_valid_frames_accepts() {
        // Boundary: fraction == min_valid_fraction accepts.
        let match_img = synthetic_image(1, 24);
        let other_img = synthetic_image(2, 24);
        let enrolled = vec![ToyEmbedding.embed(&match_img)];
        let cfg = FaceConfig {
            threshold: 0.99,
            ..FaceConfig::default()
        };
        let probe = vec![match_img.clone(), other_img];
        let out = verify_face_frames(&probe, &enrolled, &cfg, &ToyEmbedding).unwrap();
        assert_eq!(out.score, 0.5);
        assert!(out.accepted);
    }

    #[test]
    fn decision_invariant_under_template_permutation() {
        let frames: Vec<FrameImage> = (0..60).map(|i| synthetic_image(i, 24)).collect();
        let cfg = FaceConfig::default();
        let mut enrolled = enroll_face_embeddings(&frames, 10.0, &cfg, &ToyEmbedding).unwrap();
        let probe: Vec<FrameImage> = (0..5).map(|i| synthetic_image(i * 3, 24)).collect();
        let before = verify_face_frames(&probe, &enrolled, &cfg, &ToyEmbedding).unwrap();
        enrolled.reverse();
        let after = verify_face_frames(&probe, &enrolled, &cfg, &ToyEmbedding).unwrap();
        assert_eq!(before.score, after.score);
        assert_eq!(before.per_scores, after.per_scores);
    }

    #[test]
    fn valid_fraction_monotone_in_threshold() {
        let frames: Vec<FrameImage> = (0..60).map(|i| synthetic_image(i, 24)).collect();
        let enrolled =
            enroll_face_embeddings(&frames, 10.0, &FaceConfig::default(), &ToyEmbedding).unwrap();
        let probe: Vec<FrameImage> = (0..20).map(|i| synthetic_image(i * 7, 24)).collect();
        let mut last = f64::INFINITY;
        for i in 0..10 {
            let cfg = FaceConfig {
                threshold: -1.0 + 0.2 * i as f64,
                ..FaceConfig::default()
            };
            let out = verify_face_frames(&probe, &enrolled, &cfg, &ToyEmbedding).unwrap();
            assert!(out.score <= last + 1e-15);
            last = out.score;
        }
    }

    #[test]
    fn probe_with_wrong_dimension_is_rejected() {
        let enrolled = vec![FaceEmbedding {
            v: vec![1.0, 0.0],
            extractor_id: "other".into(),
        }];
        let probe = vec![synthetic_image(1, 24)];
        match verify_face_frames(&probe, &enrolled, &FaceConfig::default(), &ToyEmbedding) {
            Err(FaceError::DimensionMismatch {
                enrolled: 2,
                probe: 256,
            }) => {}
            other => panic!("expected DimensionMismatch, got {other:?}"),
        }
    }
}
