//! Whole-instrument evaluations over synthetic populations. Each runner
//! builds its corpus from a root seed, scores genuine and impostor (or bona
//! fide and attack) trials, and reports error rates plus DET points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_acer, sweep_thresholds, DetPoint, EvalError, SweepResult};
use super::synth::{
    simulate_recapture_face, simulate_replay_voice, synth_typing, synth_voice, trial_seed,
    SyntheticFaceProfile, SyntheticSpeakerProfile, SyntheticTypistProfile,
};
use crate::audio::FrontendConfig;
use crate::face::{enroll_face_embeddings, verify_face_frames, FaceConfig, ToyEmbedding};
use crate::keystroke::{build_typing_model, extract_features, typing_distance};
use crate::pad::face::{classify_face_pad, train_pad_classifier, PadLabel};
use crate::pad::iqm::{compute_iqms, lowpass_reference};
use crate::pad::voice::{score_voice_pad, train_occ};
use crate::speaker::{verify_against_templates, IVector, SpeakerBackground, SpeakerConfig};
use crate::types::{Instrument, PadDecision};

/// Per-instrument evaluation report; the JSON/CSV surface of the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub instrument: Instrument,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub far: f64,
    pub frr: f64,
    pub eer: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acer: Option<f64>,
    pub eer_threshold: f64,
    pub det: Vec<DetPoint>,
}

impl EvaluationReport {
    fn from_sweep(
        instrument: Instrument,
        n_genuine: usize,
        n_impostor: usize,
        sweep: SweepResult,
        acer: Option<f64>,
    ) -> EvaluationReport {
        EvaluationReport {
            instrument,
            n_genuine,
            n_impostor,
            far: sweep.rates.far,
            frr: sweep.rates.frr,
            eer: sweep.rates.eer,
            acer,
            eer_threshold: sweep.eer_threshold,
            det: sweep.det,
        }
    }

    /// DET points as CSV (`far,frr,threshold`).
    pub fn det_csv(&self) -> String {
        let mut out = String::from("far,frr,threshold\n");
        for p in &self.det {
            out.push_str(&format!("{},{},{}\n", p.far, p.frr, p.threshold));
        }
        out
    }
}

/// Voice verification end to end: disjoint-spectrum speakers, enrollment
/// sized to the default policy (15 samples, as three sessions of five
/// would provide), genuine and cross-speaker impostor probes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VrEvalOptions {
    pub n_speakers: usize,
    pub enroll_samples: usize,
    pub genuine_probes: usize,
    pub enroll_duration_s: f64,
    pub probe_duration_s: f64,
    pub frontend: FrontendConfig,
    pub speaker: SpeakerConfig,
    pub seed: u64,
}

impl Default for VrEvalOptions {
    fn default() -> Self {
        VrEvalOptions {
            n_speakers: 10,
            enroll_samples: 15,
            genuine_probes: 10,
            enroll_duration_s: 10.0,
            probe_duration_s: 4.0,
            frontend: FrontendConfig {
                sample_rate: 8_000,
                ..FrontendConfig::default()
            },
            speaker: SpeakerConfig {
                ubm_components: 16,
                ubm_iters: 8,
                ivector_dim: 20,
                tv_iters: 4,
                threshold: 0.5,
                min_voiced_s: 2.0,
                ubm_max_frames: 100_000,
            },
            seed: 42,
        }
    }
}

pub fn evaluate_vr(opts: &VrEvalOptions) -> Result<EvaluationReport, EvalError> {
    let sr = opts.frontend.sample_rate;
    let profiles =
        SyntheticSpeakerProfile::disjoint_population(opts.n_speakers, sr, opts.seed);

    // Enrollment audio per speaker.
    let enroll_audio: Vec<Vec<crate::audio::AudioBuffer>> = profiles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            (0..opts.enroll_samples)
                .map(|s| {
                    synth_voice(p, opts.enroll_duration_s, trial_seed(900 + i as u64, s as u64))
                })
                .collect()
        })
        .collect();

    // Background models trained on the pooled enrollment corpus.
    let pooled: Vec<crate::audio::AudioBuffer> =
        enroll_audio.iter().flatten().cloned().collect();
    let background = SpeakerBackground::train(&pooled, &opts.frontend, &opts.speaker, opts.seed)
        .map_err(|e| EvalError::UnreachableTarget(format!("background training failed: {e}")))?;

    let enrolled: Vec<Vec<IVector>> = enroll_audio
        .par_iter()
        .enumerate()
        .map(|(i, samples)| {
            samples
                .iter()
                .enumerate()
                .map(|(s, buf)| {
                    background
                        .ivector_for(
                            buf,
                            &opts.frontend,
                            opts.speaker.min_voiced_s,
                            &format!("spk{i}-enroll{s}"),
                        )
                        .expect("enrollment extraction on synthetic audio")
                })
                .collect()
        })
        .collect();

    // One probe i-vector per (speaker, trial); probes reuse across claims.
    let probes: Vec<Vec<IVector>> = profiles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            (0..opts.genuine_probes)
                .map(|t| {
                    let buf =
                        synth_voice(p, opts.probe_duration_s, trial_seed(5_000 + i as u64, t as u64));
                    background
                        .ivector_for(
                            &buf,
                            &opts.frontend,
                            opts.speaker.min_voiced_s,
                            &format!("spk{i}-probe{t}"),
                        )
                        .expect("probe extraction on synthetic audio")
                })
                .collect()
        })
        .collect();

    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (claimed, templates) in enrolled.iter().enumerate() {
        for (source, source_probes) in probes.iter().enumerate() {
            for probe in source_probes {
                let out = verify_against_templates(probe, templates, 0.0)
                    .expect("enrolled speakers have templates");
                if source == claimed {
                    genuine.push(out.score);
                } else {
                    impostor.push(out.score);
                }
            }
        }
    }

    let sweep = sweep_thresholds(&genuine, &impostor)?;
    Ok(EvaluationReport::from_sweep(
        Instrument::Vr,
        genuine.len(),
        impostor.len(),
        sweep,
        None,
    ))
}

/// Keystroke verification: separated typist population, full-policy
/// enrollment streams, short probes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KdEvalOptions {
    pub n_typists: usize,
    pub enroll_keystrokes: usize,
    pub probe_keystrokes: usize,
    pub probes_per_typist: usize,
    pub seed: u64,
}

impl Default for KdEvalOptions {
    fn default() -> Self {
        KdEvalOptions {
            n_typists: 20,
            enroll_keystrokes: 750,
            probe_keystrokes: 150,
            probes_per_typist: 10,
            seed: 7,
        }
    }
}

pub fn evaluate_kd(opts: &KdEvalOptions) -> Result<EvaluationReport, EvalError> {
    let profiles = SyntheticTypistProfile::separated_population(opts.n_typists, opts.seed);
    let models: Vec<_> = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let stream = synth_typing(p, opts.enroll_keystrokes, trial_seed(10, i as u64));
            build_typing_model(&stream, opts.enroll_keystrokes)
                .expect("enrollment stream meets its own policy")
        })
        .collect();

    let probes: Vec<Vec<crate::keystroke::KeystrokeFeatures>> = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (0..opts.probes_per_typist)
                .map(|t| {
                    let stream = synth_typing(
                        p,
                        opts.probe_keystrokes,
                        trial_seed(777 + i as u64, t as u64),
                    );
                    extract_features(&stream).expect("synthetic streams are well-formed")
                })
                .collect()
        })
        .collect();

    // Genuine score: probe against its own model; impostor: everyone
    // else's probes against the claimed model. exp(-distance) orients the
    // scores so higher means more genuine.
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (claimed, model) in models.iter().enumerate() {
        for (source, feats) in probes.iter().enumerate() {
            for f in feats {
                let score = (-typing_distance(model, f)).exp();
                if source == claimed {
                    genuine.push(score);
                } else {
                    impostor.push(score);
                }
            }
        }
    }

    let sweep = sweep_thresholds(&genuine, &impostor)?;
    Ok(EvaluationReport::from_sweep(
        Instrument::Kd,
        genuine.len(),
        impostor.len(),
        sweep,
        None,
    ))
}

/// Face verification: synthetic identities, toy embeddings, frame-sequence
/// probes. Scores fed to the sweep are the mean per-frame best cosine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrEvalOptions {
    pub n_identities: usize,
    pub image_size: usize,
    pub enroll_frames: usize,
    pub probe_frames: usize,
    pub probes_per_identity: usize,
    pub fps: f64,
    pub seed: u64,
}

impl Default for FrEvalOptions {
    fn default() -> Self {
        FrEvalOptions {
            n_identities: 10,
            image_size: 32,
            enroll_frames: 60,
            probe_frames: 5,
            probes_per_identity: 5,
            fps: 10.0,
            seed: 3,
        }
    }
}

pub fn evaluate_fr(opts: &FrEvalOptions) -> Result<EvaluationReport, EvalError> {
    let cfg = FaceConfig::default();
    let identities: Vec<SyntheticFaceProfile> = (0..opts.n_identities)
        .map(|i| SyntheticFaceProfile::new(trial_seed(opts.seed, i as u64), opts.image_size))
        .collect();

    let enrolled: Vec<_> = identities
        .par_iter()
        .map(|p| {
            let frames = p.frames(opts.enroll_frames, 0);
            enroll_face_embeddings(&frames, opts.fps, &cfg, &ToyEmbedding)
                .expect("enrollment video meets policy")
        })
        .collect();

    let probe_sets: Vec<Vec<Vec<crate::face::FrameImage>>> = identities
        .par_iter()
        .map(|p| {
            (0..opts.probes_per_identity)
                .map(|t| p.frames(opts.probe_frames, 10_000 + t as u64 * 100))
                .collect()
        })
        .collect();

    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (claimed, templates) in enrolled.iter().enumerate() {
        for (source, probes) in probe_sets.iter().enumerate() {
            for frames in probes {
                let out = verify_face_frames(frames, templates, &cfg, &ToyEmbedding)
                    .expect("probe frames are non-empty");
                let mean_cos: f64 =
                    out.per_scores.iter().sum::<f64>() / out.per_scores.len() as f64;
                if source == claimed {
                    genuine.push(mean_cos);
                } else {
                    impostor.push(mean_cos);
                }
            }
        }
    }

    let sweep = sweep_thresholds(&genuine, &impostor)?;
    Ok(EvaluationReport::from_sweep(
        Instrument::Fr,
        genuine.len(),
        impostor.len(),
        sweep,
        None,
    ))
}

/// Face PAD: classifier trained on bona fide + recaptured frames, ACER on a
/// held-out split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FraEvalOptions {
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub image_size: usize,
    pub ref_sigma: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for FraEvalOptions {
    fn default() -> Self {
        FraEvalOptions {
            train_per_class: 200,
            test_per_class: 100,
            image_size: 32,
            ref_sigma: 0.5,
            epochs: 300,
            lr: 0.5,
            seed: 11,
        }
    }
}

pub fn evaluate_fra(opts: &FraEvalOptions) -> Result<EvaluationReport, EvalError> {
    let total = opts.train_per_class + opts.test_per_class;
    let frames: Vec<(crate::face::FrameImage, crate::face::FrameImage)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let bona =
                SyntheticFaceProfile::new(trial_seed(opts.seed, i as u64), opts.image_size)
                    .frame(i as u64);
            let attack = simulate_recapture_face(&bona, trial_seed(opts.seed ^ 0xa77, i as u64));
            (bona, attack)
        })
        .collect();

    let featurize = |img: &crate::face::FrameImage| {
        let reference = lowpass_reference(img, opts.ref_sigma);
        compute_iqms(img, &reference).expect("same dimensions by construction")
    };

    let mut training = Vec::with_capacity(2 * opts.train_per_class);
    let train_features: Vec<_> = frames[..opts.train_per_class]
        .par_iter()
        .map(|(bona, attack)| (featurize(bona), featurize(attack)))
        .collect();
    for (bona, attack) in train_features {
        training.push((bona, PadLabel::BonaFide));
        training.push((attack, PadLabel::Attack));
    }
    let model = train_pad_classifier(&training, opts.epochs, opts.lr, opts.seed, opts.ref_sigma)
        .map_err(|e| EvalError::UnreachableTarget(format!("PAD training failed: {e}")))?;

    let held_out = &frames[opts.train_per_class..];
    let decisions: Vec<(PadDecision, PadDecision, f64, f64)> = held_out
        .par_iter()
        .map(|(bona, attack)| {
            let b = classify_face_pad(&model, std::slice::from_ref(bona)).unwrap();
            let a = classify_face_pad(&model, std::slice::from_ref(attack)).unwrap();
            (b.decision, a.decision, b.score, a.score)
        })
        .collect();

    let bona_decisions: Vec<PadDecision> = decisions.iter().map(|d| d.0).collect();
    let attack_decisions: Vec<PadDecision> = decisions.iter().map(|d| d.1).collect();
    let bona_scores: Vec<f64> = decisions.iter().map(|d| d.2).collect();
    let attack_scores: Vec<f64> = decisions.iter().map(|d| d.3).collect();

    let rates = compute_acer(&attack_decisions, &bona_decisions)?;
    let sweep = sweep_thresholds(&bona_scores, &attack_scores)?;
    let mut report = EvaluationReport::from_sweep(
        Instrument::Fra,
        bona_scores.len(),
        attack_scores.len(),
        sweep,
        rates.acer,
    );
    // For PAD, report the operating-point rates rather than the EER point.
    report.far = rates.apcer.unwrap();
    report.frr = rates.bpcer.unwrap();
    Ok(report)
}

/// Voice PAD: one-class model on bona fide utterances, tested against
/// held-out bona fide and replay-transformed probes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VraEvalOptions {
    pub n_train: usize,
    pub n_test_per_class: usize,
    pub n_speakers: usize,
    pub utterance_s: f64,
    pub components: usize,
    pub iters: usize,
    pub frontend: FrontendConfig,
    pub seed: u64,
}

impl Default for VraEvalOptions {
    fn default() -> Self {
        VraEvalOptions {
            n_train: 100,
            n_test_per_class: 50,
            n_speakers: 20,
            utterance_s: 3.0,
            components: 64,
            iters: 6,
            frontend: FrontendConfig {
                sample_rate: 8_000,
                ..FrontendConfig::default()
            },
            seed: 23,
        }
    }
}

pub fn evaluate_vra(opts: &VraEvalOptions) -> Result<EvaluationReport, EvalError> {
    let profiles = SyntheticSpeakerProfile::disjoint_population(
        opts.n_speakers,
        opts.frontend.sample_rate,
        opts.seed,
    );
    let utterance = |idx: usize, tag: u64| {
        let p = &profiles[idx % profiles.len()];
        synth_voice(p, opts.utterance_s, trial_seed(tag, idx as u64))
    };

    let train: Vec<_> = (0..opts.n_train).map(|i| utterance(i, 1)).collect();
    let model = train_occ(&train, &opts.frontend, opts.components, opts.iters, opts.seed)
        .map_err(|e| EvalError::UnreachableTarget(format!("OCC training failed: {e}")))?;

    let outcomes: Vec<(PadDecision, f64, PadDecision, f64)> = (0..opts.n_test_per_class)
        .into_par_iter()
        .map(|i| {
            let bona = utterance(i, 2);
            let replay = simulate_replay_voice(&utterance(i, 3), trial_seed(4, i as u64));
            let b = score_voice_pad(&model, &bona, &opts.frontend).expect("digests match");
            let a = score_voice_pad(&model, &replay, &opts.frontend).expect("digests match");
            (b.decision, b.score, a.decision, a.score)
        })
        .collect();

    let bona_decisions: Vec<PadDecision> = outcomes.iter().map(|o| o.0).collect();
    let bona_scores: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    let attack_decisions: Vec<PadDecision> = outcomes.iter().map(|o| o.2).collect();
    let attack_scores: Vec<f64> = outcomes.iter().map(|o| o.3).collect();

    let rates = compute_acer(&attack_decisions, &bona_decisions)?;
    let sweep = sweep_thresholds(&bona_scores, &attack_scores)?;
    let mut report = EvaluationReport::from_sweep(
        Instrument::Vra,
        bona_scores.len(),
        attack_scores.len(),
        sweep,
        rates.acer,
    );
    report.far = rates.apcer.unwrap();
    report.frr = rates.bpcer.unwrap();
    Ok(report)
}
