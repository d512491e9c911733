//! Face presentation-attack detection: 18 image-quality measures per frame
//! fed to a regularized linear margin classifier, with median aggregation
//! over the frames of one presentation.

use serde::{Deserialize, Serialize};

use super::iqm::{compute_iqms, lowpass_reference, IqmVector, IQM_DIM};
use super::PadError;
use crate::face::FrameImage;
use crate::types::{Instrument, PadOutcome};

/// L2 penalty used by the hinge-loss trainer.
const REG_LAMBDA: f64 = 1e-3;

/// Bona fide vs. attack label for classifier training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadLabel {
    BonaFide,
    Attack,
}

impl PadLabel {
    /// Bona fide maps to +1, attack to -1, matching the score sign
    /// convention of [`PadOutcome`].
    fn sign(self) -> f64 {
        match self {
            PadLabel::BonaFide => 1.0,
            PadLabel::Attack => -1.0,
        }
    }
}

/// Linear decision function over z-normalized IQM features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPadModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    /// Gaussian sigma of the low-pass reference the features are computed
    /// against; scoring must use the same value.
    pub ref_sigma: f64,
}

impl LinearPadModel {
    /// Raw decision score for one feature vector (positive = bona fide).
    #[allow(clippy::needless_range_loop)]
    pub fn score_features(&self, features: &IqmVector) -> f64 {
        let x = features.to_array();
        let mut s = self.bias;
        for i in 0..IQM_DIM {
            let z = (x[i] - self.feature_means[i]) / self.feature_stds[i];
            s += self.weights[i] * z;
        }
        s
    }

    /// Score of one frame: IQMs against its own low-pass reference.
    pub fn score_frame(&self, frame: &FrameImage) -> Result<f64, PadError> {
        let reference = lowpass_reference(frame, self.ref_sigma);
        Ok(self.score_features(&compute_iqms(frame, &reference)?))
    }
}

fn hinge_loss(
    examples: &[([f64; IQM_DIM], f64)],
    weights: &[f64],
    bias: f64,
) -> f64 {
    let data: f64 = examples
        .iter()
        .map(|(z, y)| {
            let margin = y * (z.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>() + bias);
            (1.0 - margin).max(0.0)
        })
        .sum::<f64>()
        / examples.len() as f64;
    data + REG_LAMBDA * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Trains the linear PAD classifier by deterministic full-batch gradient
/// descent on hinge loss with L2 regularization; step halving guarantees
/// the training loss never increases.
///
/// Features are z-normalized with constants stored in the model, so train
/// and test always share the same normalization. The `seed` parameter is
/// reserved for stochastic variants; full-batch training starts from zero
/// weights and is deterministic regardless of it.
pub fn train_pad_classifier(
    features: &[(IqmVector, PadLabel)],
    epochs: usize,
    lr: f64,
    _seed: u64,
    ref_sigma: f64,
) -> Result<LinearPadModel, PadError> {
    let n_bona = features
        .iter()
        .filter(|(_, l)| *l == PadLabel::BonaFide)
        .count();
    let n_attack = features.len() - n_bona;
    if n_bona == 0 || n_attack == 0 {
        return Err(PadError::SingleClassData);
    }
    if n_bona < 10 {
        return Err(PadError::TooFewExamples {
            class: "bona_fide",
            got: n_bona,
            needed: 10,
        });
    }
    if n_attack < 10 {
        return Err(PadError::TooFewExamples {
            class: "attack",
            got: n_attack,
            needed: 10,
        });
    }

    // Z-normalization constants from the training set.
    let n = features.len() as f64;
    let mut means = vec![0.0; IQM_DIM];
    for (f, _) in features {
        for (m, v) in means.iter_mut().zip(f.to_array()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stds = vec![0.0; IQM_DIM];
    for (f, _) in features {
        for (s, (v, m)) in stds.iter_mut().zip(f.to_array().iter().zip(&means)) {
            *s += (v - m) * (v - m);
        }
    }
    stds.iter_mut().for_each(|s| *s = (*s / n).sqrt().max(1e-9));

    let examples: Vec<([f64; IQM_DIM], f64)> = features
        .iter()
        .map(|(f, l)| {
            let raw = f.to_array();
            let mut z = [0.0; IQM_DIM];
            for i in 0..IQM_DIM {
                z[i] = (raw[i] - means[i]) / stds[i];
            }
            (z, l.sign())
        })
        .collect();

    let mut weights = vec![0.0; IQM_DIM];
    let mut bias = 0.0;
    let mut loss = hinge_loss(&examples, &weights, bias);
    for _ in 0..epochs {
        // Subgradient of the hinge term plus the L2 term.
        let mut gw = vec![0.0; IQM_DIM];
        let mut gb = 0.0;
        for (z, y) in &examples {
            let margin =
                y * (z.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>() + bias);
            if margin < 1.0 {
                for i in 0..IQM_DIM {
                    gw[i] -= y * z[i];
                }
                gb -= y;
            }
        }
        let scale = 1.0 / examples.len() as f64;
        for i in 0..IQM_DIM {
            gw[i] = gw[i] * scale + 2.0 * REG_LAMBDA * weights[i];
        }
        gb *= scale;

        // Backtracking: halve the step until the loss does not increase.
        let mut step = lr;
        loop {
            let cand_w: Vec<f64> = weights
                .iter()
                .zip(&gw)
                .map(|(w, g)| w - step * g)
                .collect();
            let cand_b = bias - step * gb;
            let cand_loss = hinge_loss(&examples, &cand_w, cand_b);
            if cand_loss <= loss {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                break;
            }
            step /= 2.0;
            if step < 1e-12 {
                break;
            }
        }
    }

    Ok(LinearPadModel {
        weights,
        bias,
        feature_means: means,
        feature_stds: stds,
        ref_sigma,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Classifies one presentation: per-frame linear scores, median over
/// frames, bona fide exactly when the median is positive.
pub fn classify_face_pad(
    model: &LinearPadModel,
    frames: &[FrameImage],
) -> Result<PadOutcome, PadError> {
    if frames.is_empty() {
        return Err(PadError::EmptyInput);
    }
    let mut scores = Vec::with_capacity(frames.len());
    for f in frames {
        scores.push(model.score_frame(f)?);
    }
    let m = median(&mut scores);
    Ok(PadOutcome::from_score(Instrument::Fra, m))
}

/// One row of a labeled PAD training corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path to a PGM frame, relative to the manifest file.
    pub path: String,
    pub label: PadLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack_kind: Option<AttackKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Print,
    Replay,
}

/// Loads a JSON manifest and the frames it references, producing labeled
/// IQM feature vectors ready for training.
pub fn load_labeled_corpus(
    manifest_path: &std::path::Path,
    ref_sigma: f64,
) -> Result<Vec<(IqmVector, PadLabel)>, crate::engine::EngineError> {
    use crate::engine::EngineError;
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| EngineError::Config(format!("read {}: {e}", manifest_path.display())))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text)
        .map_err(|e| EngineError::Config(format!("parse manifest: {e}")))?;
    let base = manifest_path.parent().unwrap_or(std::path::Path::new("."));
    let mut out = Vec::with_capacity(entries.len());
    for entry in entries {
        let frame = crate::face::pgm::read_pgm_file(&base.join(&entry.path))?;
        let reference = lowpass_reference(&frame, ref_sigma);
        out.push((compute_iqms(&frame, &reference)?, entry.label));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vector_with(first: f64, seed: u64) -> IqmVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        IqmVector {
            mse: first,
            psnr: rng.random_range(-1.0..1.0),
            snr: rng.random_range(-1.0..1.0),
            maxdiff: rng.random_range(-1.0..1.0),
            avgdiff: rng.random_range(-1.0..1.0),
            nae: rng.random_range(-1.0..1.0),
            ramd: rng.random_range(-1.0..1.0),
            struct_content: rng.random_range(-1.0..1.0),
            nxcorr: rng.random_range(-1.0..1.0),
            lmse: rng.random_range(-1.0..1.0),
            norm_mse: rng.random_range(-1.0..1.0),
            ssim_global: rng.random_range(-1.0..1.0),
            mean_angle: rng.random_range(-1.0..1.0),
            mean_angle_mag: rng.random_range(-1.0..1.0),
            total_edge_diff: rng.random_range(-1.0..1.0),
            total_corner_diff: rng.random_range(-1.0..1.0),
            spectral_mag_err: rng.random_range(-1.0..1.0),
            grad_mag_err: rng.random_range(-1.0..1.0),
        }
    }

    fn separable_set() -> Vec<(IqmVector, PadLabel)> {
        // Bona fide clusters at mse ~ +5, attack at mse ~ -5.
        let mut set = Vec::new();
        for i in 0..12u64 {
            set.push((vector_with(5.0 + 0.1 * i as f64, i), PadLabel::BonaFide));
            set.push((vector_with(-5.0 - 0.1 * i as f64, 100 + i), PadLabel::Attack));
        }
        set
    }

    #[test]
    fn separable_data_reaches_full_training_accuracy() {
        let set = separable_set();
        let model = train_pad_classifier(&set, 300, 0.5, 0, 0.5).unwrap();
        for (f, label) in &set {
            let s = model.score_features(f);
            match label {
                PadLabel::BonaFide => assert!(s > 0.0, "bona fide scored {s}"),
                PadLabel::Attack => assert!(s < 0.0, "attack scored {s}"),
            }
        }
    }

    #[test]
    fn label_flip_negates_scores_on_symmetric_data() {
        // Symmetric construction: for every example the mirrored example
        // with flipped label exists, so flipping all labels must negate
        // every decision score exactly.
        let mut set = Vec::new();
        for i in 0..15u64 {
            let v = vector_with(3.0, i);
            let mut mirrored = v.clone();
            let arr = v.to_array();
            mirrored.mse = -arr[0];
            mirrored.psnr = -arr[1];
            mirrored.snr = -arr[2];
            mirrored.maxdiff = -arr[3];
            mirrored.avgdiff = -arr[4];
            mirrored.nae = -arr[5];
            mirrored.ramd = -arr[6];
            mirrored.struct_content = -arr[7];
            mirrored.nxcorr = -arr[8];
            mirrored.lmse = -arr[9];
            mirrored.norm_mse = -arr[10];
            mirrored.ssim_global = -arr[11];
            mirrored.mean_angle = -arr[12];
            mirrored.mean_angle_mag = -arr[13];
            mirrored.total_edge_diff = -arr[14];
            mirrored.total_corner_diff = -arr[15];
            mirrored.spectral_mag_err = -arr[16];
            mirrored.grad_mag_err = -arr[17];
            set.push((v, PadLabel::BonaFide));
            set.push((mirrored, PadLabel::Attack));
        }
        let flipped: Vec<(IqmVector, PadLabel)> = set
            .iter()
            .map(|(f, l)| {
                let l = match l {
                    PadLabel::BonaFide => PadLabel::Attack,
                    PadLabel::Attack => PadLabel::BonaFide,
                };
                (f.clone(), l)
            })
            .collect();

        let m1 = train_pad_classifier(&set, 200, 0.5, 0, 0.5).unwrap();
        let m2 = train_pad_classifier(&flipped, 200, 0.5, 0, 0.5).unwrap();
        for (f, _) in &set {
            let s1 = m1.score_features(f);
            let s2 = m2.score_features(f);
            assert!(
                (s1 + s2).abs() < 1e-9,
                "scores not negated: {s1} vs {s2}"
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let set = separable_set();
        let a = train_pad_classifier(&set, 100, 0.5, 1, 0.5).unwrap();
        let b = train_pad_classifier(&set, 100, 0.5, 2, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_and_tiny_classes_are_rejected() {
        let bona_only: Vec<(IqmVector, PadLabel)> = (0..12)
            .map(|i| (vector_with(1.0, i), PadLabel::BonaFide))
            .collect();
        assert!(matches!(
            train_pad_classifier(&bona_only, 10, 0.5, 0, 0.5),
            Err(PadError::SingleClassData)
        ));

        let mut lopsided = bona_only;
        lopsided.push((vector_with(-1.0, 99), PadLabel::Attack));
        assert!(matches!(
            train_pad_classifier(&lopsided, 10, 0.5, 0, 0.5),
            Err(PadError::TooFewExamples { class: "attack", .. })
        ));
    }

    #[test]
    fn median_rule_on_known_scores() {
        // Frames scoring {+1, +2, -5}: median +1, bona fide.
        let mut v = vec![1.0, 2.0, -5.0];
        assert_eq!(median(&mut v), 1.0);
        let mut even = vec![1.0, 3.0];
        assert_eq!(median(&mut even), 2.0);
    }

    #[test]
    fn classify_empty_input_is_rejected() {
        let model = LinearPadModel {
            weights: vec![0.0; IQM_DIM],
            bias: 1.0,
            feature_means: vec![0.0; IQM_DIM],
            feature_stds: vec![1.0; IQM_DIM],
            ref_sigma: 0.5,
        };
        assert!(matches!(
            classify_face_pad(&model, &[]),
            Err(PadError::EmptyInput)
        ));
    }

    #[test]
    fn single_frame_decides_alone() {
        let model = LinearPadModel {
            weights: vec![0.0; IQM_DIM],
            bias: 0.7,
            feature_means: vec![0.0; IQM_DIM],
            feature_stds: vec![1.0; IQM_DIM],
            ref_sigma: 0.5,
        };
        let img = crate::face::FrameImage::new(
            24,
            24,
            (0..576).map(|i| (i % 251) as f64).collect(),
        )
        .unwrap();
        let out = classify_face_pad(&model, &[img]).unwrap();
        // Zero weights: score is exactly the bias.
        assert!((out.score - 0.7).abs() < 1e-12);
        assert_eq!(out.decision, crate::types::PadDecision::BonaFide);
    }

    #[test]
    fn aggregation_invariant_under_frame_permutation() {
        let set = separable_set();
        let model = train_pad_classifier(&set, 100, 0.5, 0, 0.8).unwrap();
        let frames: Vec<crate::face::FrameImage> = (0..5)
            .map(|i| crate::face::tests::synthetic_image(i, 32))
            .collect();
        let a = classify_face_pad(&model, &frames).unwrap();
        let mut rev = frames.clone();
        rev.reverse();
        let b = classify_face_pad(&model, &rev).unwrap();
        assert_eq!(a.score, b.score);
        assert_eq!(a.decision, b.decision);
    }

    #[test]
    fn loss_is_nonincreasing_under_backtracking() {
        // Probe the internal loss trace indirectly: training longer can
        // never end with a higher loss.
        let set = separable_set();
        let to_examples = |model: &LinearPadModel| {
            set.iter()
                .map(|(f, l)| {
                    let raw = f.to_array();
                    let mut z = [0.0; IQM_DIM];
                    for i in 0..IQM_DIM {
                        z[i] = (raw[i] - model.feature_means[i]) / model.feature_stds[i];
                    }
                    (z, l.sign())
                })
                .collect::<Vec<_>>()
        };
        let short = train_pad_classifier(&set, 10, 0.5, 0, 0.5).unwrap();
        let long = train_pad_classifier(&set, 200, 0.5, 0, 0.5).unwrap();
        let l_short = hinge_loss(&to_examples(&short), &short.weights, short.bias);
        let l_long = hinge_loss(&to_examples(&long), &long.weights, long.bias);
        assert!(l_long <= l_short + 1e-12);
    }
}
