//! The engine wires registry, instruments, and trust fusion over one data
//! directory. The CLI and the HTTP service both drive this single code
//! path, so identical inputs produce identical outcomes on either surface.

use std::path::Path;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{wav, AudioBuffer, AudioError};
use crate::config::ServiceConfig;
use crate::eval::EvalError;
use crate::face::{
    enroll_face_embeddings, pgm, verify_face_frames, FaceError, FrameImage, ToyEmbedding,
};
use crate::keystroke::{
    self, build_typing_model, extract_features, score_typing, KeyEvent, KeystrokeError,
};
use crate::pad::face::{classify_face_pad, train_pad_classifier, LinearPadModel, PadLabel};
use crate::pad::iqm::IqmVector;
use crate::pad::voice::{score_voice_pad, train_occ, OccGmm};
use crate::pad::PadError;
use crate::registry::{
    EnrollmentStatus, Identity, RegistryError, Store, Template, TemplateBody,
};
use crate::speaker::{
    verify_against_templates, IVector, SpeakerBackground, SpeakerError,
};
use crate::trust::{build_trust_report, InstrumentResult, TrustReport};
use crate::types::{Instrument, Modality, PadOutcome, VerificationOutcome};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Speaker(#[from] SpeakerError),
    #[error(transparent)]
    Face(#[from] FaceError),
    #[error(transparent)]
    Keystroke(#[from] KeystrokeError),
    #[error(transparent)]
    Pad(#[from] PadError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("instrument {0} unavailable: its model files are missing from the data directory")]
    InstrumentUnavailable(Instrument),
    #[error("unsupported payload for this modality: {0}")]
    UnsupportedPayload(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// A raw sample as presented over the wire or on the command line.
#[derive(Debug, Clone)]
pub enum SamplePayload {
    /// 16-bit PCM mono WAV bytes.
    Wav(Vec<u8>),
    /// Ordered PGM (P5) frames with their declared frame rate.
    PgmFrames { frames: Vec<Vec<u8>>, fps: f64 },
    /// Key events, already parsed.
    Keystrokes(Vec<KeyEvent>),
}

impl SamplePayload {
    pub fn modality(&self) -> Modality {
        match self {
            SamplePayload::Wav(_) => Modality::Voice,
            SamplePayload::PgmFrames { .. } => Modality::Face,
            SamplePayload::Keystrokes(_) => Modality::Keystroke,
        }
    }

    /// Canonical byte encoding; its SHA-256 is the sample's content
    /// address, shared between verification and PAD calls on the same
    /// presentation.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        match self {
            SamplePayload::Wav(bytes) => bytes.clone(),
            SamplePayload::PgmFrames { frames, fps } => {
                let mut out = format!("PGMSEQ1\n{fps}\n").into_bytes();
                for f in frames {
                    out.extend(format!("{}\n", f.len()).into_bytes());
                    out.extend_from_slice(f);
                }
                out
            }
            SamplePayload::Keystrokes(events) => {
                keystroke::events_to_jsonl(events).into_bytes()
            }
        }
    }
}

/// Parsed form of a payload plus its policy-relevant size.
enum ParsedSample {
    Voice(AudioBuffer),
    Face { frames: Vec<FrameImage>, fps: f64 },
    Keystrokes(Vec<KeyEvent>),
}

impl ParsedSample {
    fn duration_or_count(&self) -> f64 {
        match self {
            ParsedSample::Voice(buf) => buf.duration_s(),
            ParsedSample::Face { frames, fps } => frames.len() as f64 / fps,
            ParsedSample::Keystrokes(events) => events.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub instruments: Vec<Instrument>,
}

struct Models {
    speaker_background: Option<SpeakerBackground>,
    pad_face: Option<LinearPadModel>,
    pad_voice: Option<OccGmm>,
}

pub struct Engine {
    cfg: ServiceConfig,
    store: Store,
    models: Models,
    extractor: ToyEmbedding,
}

fn load_model<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>, EngineError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| EngineError::Config(format!("read {}: {e}", path.display())))?;
    let model = serde_json::from_str(&text)
        .map_err(|e| EngineError::Config(format!("parse {}: {e}", path.display())))?;
    Ok(Some(model))
}

fn save_model<T: Serialize>(path: &Path, model: &T) -> Result<(), EngineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| EngineError::Config(format!("create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, serde_json::to_vec(model).expect("model serializes"))
        .map_err(|e| EngineError::Config(format!("write {}: {e}", path.display())))
}

impl Engine {
    /// Opens the data directory and loads whatever instrument models exist;
    /// instruments without models are reported unavailable rather than
    /// failing startup.
    pub fn open(cfg: ServiceConfig) -> Result<Engine, EngineError> {
        cfg.validate().map_err(EngineError::Config)?;
        let store = Store::open(&cfg.data_dir)?;
        let models = Models {
            speaker_background: load_model(&cfg.speaker_background_path())?,
            pad_face: load_model(&cfg.pad_face_model_path())?,
            pad_voice: load_model(&cfg.pad_voice_model_path())?,
        };
        Ok(Engine {
            cfg,
            store,
            models,
            extractor: ToyEmbedding,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".to_string(),
            instruments: self.available_instruments(),
        }
    }

    /// FR and KD need no trained background models; VR, FRA, and VRA appear
    /// once their models exist on disk.
    pub fn available_instruments(&self) -> Vec<Instrument> {
        let mut out = vec![Instrument::Fr, Instrument::Kd];
        if self.models.speaker_background.is_some() {
            out.push(Instrument::Vr);
        }
        if self.models.pad_face.is_some() {
            out.push(Instrument::Fra);
        }
        if self.models.pad_voice.is_some() {
            out.push(Instrument::Vra);
        }
        out.sort();
        out
    }

    pub fn register_learner(&self, display_name: &str) -> Result<Identity, EngineError> {
        Ok(self.store.register_learner(display_name)?)
    }

    fn parse_payload(&self, payload: &SamplePayload) -> Result<ParsedSample, EngineError> {
        match payload {
            SamplePayload::Wav(bytes) => {
                let buf = wav::read_wav_bytes(bytes)?;
                if buf.sample_rate() != self.cfg.frontend.sample_rate {
                    return Err(AudioError::SampleRateMismatch {
                        expected: self.cfg.frontend.sample_rate,
                        got: buf.sample_rate(),
                    }
                    .into());
                }
                Ok(ParsedSample::Voice(buf))
            }
            SamplePayload::PgmFrames { frames, fps } => {
                if *fps <= 0.0 {
                    return Err(EngineError::UnsupportedPayload(
                        "frame rate must be positive".into(),
                    ));
                }
                if frames.is_empty() {
                    return Err(EngineError::UnsupportedPayload("no frames".into()));
                }
                let decoded: Result<Vec<FrameImage>, FaceError> =
                    frames.iter().map(|f| pgm::read_pgm_bytes(f)).collect();
                Ok(ParsedSample::Face {
                    frames: decoded?,
                    fps: *fps,
                })
            }
            SamplePayload::Keystrokes(events) => {
                if events.is_empty() {
                    return Err(EngineError::UnsupportedPayload("no key events".into()));
                }
                Ok(ParsedSample::Keystrokes(events.clone()))
            }
        }
    }

    fn audit(
        &self,
        kind: crate::registry::EventKind,
        identity: Option<&str>,
        instrument: Instrument,
        summary: serde_json::Value,
    ) {
        let _ = self.store.record_audit_event(crate::registry::AuditEvent {
            seq: 0,
            event_kind: kind,
            identity: identity.map(str::to_string),
            instrument,
            outcome_summary: summary,
            at: Utc::now(),
        });
    }

    /// Validates and stores one enrollment sample.
    pub fn submit_enrollment(
        &self,
        identity: &str,
        modality: Modality,
        session_id: &str,
        payload: &SamplePayload,
    ) -> Result<EnrollmentStatus, EngineError> {
        if payload.modality() != modality {
            return Err(EngineError::UnsupportedPayload(format!(
                "payload is {}, endpoint is {}",
                payload.modality(),
                modality
            )));
        }
        let parsed = self.parse_payload(payload)?;
        let policy = self.cfg.policies.for_modality(modality);
        let (sample, status) = self.store.submit_enrollment_sample(
            identity,
            modality,
            session_id,
            &payload.canonical_bytes(),
            parsed.duration_or_count(),
            policy,
        )?;
        self.audit(
            crate::registry::EventKind::Enroll,
            Some(identity),
            verification_instrument(modality),
            serde_json::json!({
                "action": "sample",
                "sample_ref": sample.payload_ref,
                "complete": status.complete,
            }),
        );
        Ok(status)
    }

    pub fn enrollment_status(
        &self,
        identity: &str,
        modality: Modality,
    ) -> Result<EnrollmentStatus, EngineError> {
        let policy = self.cfg.policies.for_modality(modality);
        Ok(self.store.enrollment_status(identity, modality, policy)?)
    }

    /// Trains templates from the stored samples and persists them.
    pub fn finalize_enrollment(
        &self,
        identity: &str,
        modality: Modality,
    ) -> Result<Vec<Template>, EngineError> {
        let policy = self.cfg.policies.for_modality(modality);
        let templates = match modality {
            Modality::Voice => {
                let background = self.speaker_background()?;
                let frontend = &self.cfg.frontend;
                let min_voiced = self.cfg.speaker.min_voiced_s;
                self.store
                    .finalize_enrollment(identity, modality, policy, |samples| {
                        let mut bodies = Vec::with_capacity(samples.len());
                        for (sample, payload) in samples {
                            let buf = wav::read_wav_bytes(payload)
                                .map_err(|e| format!("sample {}: {e}", sample.payload_ref))?;
                            let iv = background
                                .ivector_for(&buf, frontend, min_voiced, &sample.payload_ref)
                                .map_err(|e| format!("sample {}: {e}", sample.payload_ref))?;
                            bodies.push((TemplateBody::IVector(iv), sample.session_id.clone()));
                        }
                        Ok(bodies)
                    })?
            }
            Modality::Face => {
                let face_cfg = &self.cfg.face;
                let extractor = &self.extractor;
                self.store
                    .finalize_enrollment(identity, modality, policy, |samples| {
                        let mut bodies = Vec::new();
                        for (sample, payload) in samples {
                            let (frames, fps) = decode_frame_sequence(payload)
                                .map_err(|e| format!("sample {}: {e}", sample.payload_ref))?;
                            let embeddings =
                                enroll_face_embeddings(&frames, fps, face_cfg, extractor)
                                    .map_err(|e| format!("sample {}: {e}", sample.payload_ref))?;
                            bodies.extend(embeddings.into_iter().map(|e| {
                                (TemplateBody::FaceEmbedding(e), sample.session_id.clone())
                            }));
                        }
                        Ok(bodies)
                    })?
            }
            Modality::Keystroke => {
                let min = policy.min_payload as usize;
                self.store
                    .finalize_enrollment(identity, modality, policy, |samples| {
                        let mut bodies = Vec::new();
                        for (sample, payload) in samples {
                            let text = String::from_utf8_lossy(payload);
                            let events = keystroke::parse_jsonl_events(&text)
                                .map_err(|e| format!("sample {}: {e}", sample.payload_ref))?;
                            let model = build_typing_model(&events, min)
                                .map_err(|e| format!("sample {}: {e}", sample.payload_ref))?;
                            bodies.push((
                                TemplateBody::TypingModel(model),
                                sample.session_id.clone(),
                            ));
                        }
                        Ok(bodies)
                    })?
            }
        };
        self.audit(
            crate::registry::EventKind::Enroll,
            Some(identity),
            verification_instrument(modality),
            serde_json::json!({"action": "finalize", "templates": templates.len()}),
        );
        Ok(templates)
    }

    fn speaker_background(&self) -> Result<&SpeakerBackground, EngineError> {
        self.models
            .speaker_background
            .as_ref()
            .ok_or(EngineError::InstrumentUnavailable(Instrument::Vr))
    }

    /// Verifies a probe against a claimed identity. With an `activity_id`,
    /// the outcome is also recorded for later trust-report fusion.
    pub fn verify(
        &self,
        identity: &str,
        modality: Modality,
        payload: &SamplePayload,
        activity_id: Option<&str>,
    ) -> Result<VerificationOutcome, EngineError> {
        self.store.identity(identity)?;
        let parsed = self.parse_payload(payload)?;
        let sample_ref = self.store.put_blob(&payload.canonical_bytes())?;
        let templates = self.store.fetch_templates(identity, modality)?;

        let outcome = match (&parsed, modality) {
            (ParsedSample::Voice(buf), Modality::Voice) => {
                let background = self.speaker_background()?;
                let enrolled: Vec<IVector> = templates
                    .into_iter()
                    .filter_map(|t| match t.body {
                        TemplateBody::IVector(iv) => Some(iv),
                        _ => None,
                    })
                    .collect();
                if enrolled.is_empty() {
                    return Err(SpeakerError::NotEnrolled.into());
                }
                let probe = background.ivector_for(
                    buf,
                    &self.cfg.frontend,
                    self.cfg.speaker.min_voiced_s,
                    &sample_ref,
                )?;
                verify_against_templates(&probe, &enrolled, self.cfg.speaker.threshold)?
            }
            (ParsedSample::Face { frames, .. }, Modality::Face) => {
                let enrolled: Vec<crate::face::FaceEmbedding> = templates
                    .into_iter()
                    .filter_map(|t| match t.body {
                        TemplateBody::FaceEmbedding(e) => Some(e),
                        _ => None,
                    })
                    .collect();
                if enrolled.is_empty() {
                    return Err(FaceError::NotEnrolled.into());
                }
                verify_face_frames(frames, &enrolled, &self.cfg.face, &self.extractor)?
            }
            (ParsedSample::Keystrokes(events), Modality::Keystroke) => {
                let model = templates.into_iter().find_map(|t| match t.body {
                    TemplateBody::TypingModel(m) => Some(m),
                    _ => None,
                });
                let model = model.ok_or(KeystrokeError::NoModel)?;
                let features = extract_features(events)?;
                score_typing(&model, &features, self.cfg.keystroke.threshold)?
            }
            _ => {
                return Err(EngineError::UnsupportedPayload(
                    "payload does not match modality".into(),
                ))
            }
        };

        if let Some(activity) = activity_id {
            self.store.record_instrument_result(
                activity,
                &InstrumentResult::verification(outcome.clone(), &sample_ref, Utc::now()),
            )?;
        }
        self.audit(
            crate::registry::EventKind::Verify,
            Some(identity),
            outcome.instrument,
            serde_json::json!({
                "sample_ref": sample_ref,
                "score": outcome.score,
                "accepted": outcome.accepted,
            }),
        );
        Ok(outcome)
    }

    /// Runs the PAD instrument for the payload's modality. Identity-
    /// agnostic; with an `activity_id` the outcome joins that activity's
    /// evidence.
    pub fn pad_check(
        &self,
        payload: &SamplePayload,
        activity_id: Option<&str>,
    ) -> Result<PadOutcome, EngineError> {
        let parsed = self.parse_payload(payload)?;
        let sample_ref = self.store.put_blob(&payload.canonical_bytes())?;
        let outcome = match &parsed {
            ParsedSample::Voice(buf) => {
                let model = self
                    .models
                    .pad_voice
                    .as_ref()
                    .ok_or(EngineError::InstrumentUnavailable(Instrument::Vra))?;
                score_voice_pad(model, buf, &self.cfg.frontend)?
            }
            ParsedSample::Face { frames, .. } => {
                let model = self
                    .models
                    .pad_face
                    .as_ref()
                    .ok_or(EngineError::InstrumentUnavailable(Instrument::Fra))?;
                classify_face_pad(model, frames)?
            }
            ParsedSample::Keystrokes(_) => {
                return Err(EngineError::UnsupportedPayload(
                    "keystroke has no PAD instrument".into(),
                ))
            }
        };

        if let Some(activity) = activity_id {
            self.store.record_instrument_result(
                activity,
                &InstrumentResult::pad(outcome.clone(), &sample_ref, Utc::now()),
            )?;
        }
        self.audit(
            crate::registry::EventKind::PadCheck,
            None,
            outcome.instrument,
            serde_json::json!({
                "sample_ref": sample_ref,
                "score": outcome.score,
                "decision": outcome.decision,
            }),
        );
        Ok(outcome)
    }

    /// Builds (and persists) the trust report for one activity from the
    /// instrument results recorded so far.
    pub fn build_report(
        &self,
        activity_id: &str,
        identity: &str,
    ) -> Result<TrustReport, EngineError> {
        self.store.identity(identity)?;
        let results = self.store.activity_results(activity_id)?;
        let report = build_trust_report(identity, activity_id, results, &self.cfg.fusion);
        self.store.put_trust_report(activity_id, &report)?;
        self.audit(
            crate::registry::EventKind::Fuse,
            Some(identity),
            Instrument::Vr,
            serde_json::json!({
                "activity": activity_id,
                "fused_score": report.fused_score,
                "decision": report.decision,
            }),
        );
        Ok(report)
    }

    pub fn get_report(&self, activity_id: &str) -> Result<Option<TrustReport>, EngineError> {
        Ok(self.store.get_trust_report(activity_id)?)
    }

    /// Stored report bytes; the byte-stable surface both the CLI and the
    /// HTTP service serve verbatim.
    pub fn get_report_bytes(&self, activity_id: &str) -> Result<Option<Vec<u8>>, EngineError> {
        Ok(self.store.get_trust_report_bytes(activity_id)?)
    }

    /// Trains and persists the voice-verification background models from a
    /// corpus of utterances.
    pub fn train_speaker_background(
        &mut self,
        corpus: &[AudioBuffer],
        seed: u64,
    ) -> Result<(), EngineError> {
        let background =
            SpeakerBackground::train(corpus, &self.cfg.frontend, &self.cfg.speaker, seed)?;
        save_model(&self.cfg.speaker_background_path(), &background)?;
        self.models.speaker_background = Some(background);
        Ok(())
    }

    /// Trains and persists the face PAD classifier from labeled features.
    pub fn train_pad_face(
        &mut self,
        features: &[(IqmVector, PadLabel)],
        seed: u64,
    ) -> Result<(), EngineError> {
        let model = train_pad_classifier(
            features,
            self.cfg.pad_face.train_epochs,
            self.cfg.pad_face.train_lr,
            seed,
            self.cfg.pad_face.ref_sigma,
        )?;
        save_model(&self.cfg.pad_face_model_path(), &model)?;
        self.models.pad_face = Some(model);
        Ok(())
    }

    /// Trains and persists the voice PAD one-class model from bona fide
    /// utterances.
    pub fn train_pad_voice(
        &mut self,
        bona_fide: &[AudioBuffer],
        seed: u64,
    ) -> Result<(), EngineError> {
        let model = train_occ(
            bona_fide,
            &self.cfg.frontend,
            self.cfg.pad_voice.components,
            self.cfg.pad_voice.train_iters,
            seed,
        )?;
        save_model(&self.cfg.pad_voice_model_path(), &model)?;
        self.models.pad_voice = Some(model);
        Ok(())
    }
}

fn verification_instrument(modality: Modality) -> Instrument {
    match modality {
        Modality::Voice => Instrument::Vr,
        Modality::Face => Instrument::Fr,
        Modality::Keystroke => Instrument::Kd,
    }
}

/// Decodes the canonical frame-sequence encoding produced by
/// [`SamplePayload::canonical_bytes`].
pub fn decode_frame_sequence(bytes: &[u8]) -> Result<(Vec<FrameImage>, f64), EngineError> {
    fn err(m: &str) -> EngineError {
        EngineError::UnsupportedPayload(m.to_string())
    }
    fn read_line(bytes: &[u8], pos: &mut usize) -> Result<String, EngineError> {
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos] != b'\n' {
            *pos += 1;
        }
        if *pos >= bytes.len() {
            return Err(err("truncated frame sequence"));
        }
        let line = String::from_utf8_lossy(&bytes[start..*pos]).into_owned();
        *pos += 1;
        Ok(line)
    }

    let mut pos = 0usize;
    if read_line(bytes, &mut pos)? != "PGMSEQ1" {
        return Err(err("not a frame sequence payload"));
    }
    let fps: f64 = read_line(bytes, &mut pos)?
        .parse()
        .map_err(|_| err("bad fps in frame sequence"))?;
    let mut frames = Vec::new();
    while pos < bytes.len() {
        let len: usize = read_line(bytes, &mut pos)?
            .parse()
            .map_err(|_| err("bad frame length"))?;
        if pos + len > bytes.len() {
            return Err(err("truncated frame data"));
        }
        frames.push(pgm::read_pgm_bytes(&bytes[pos..pos + len])?);
        pos += len;
    }
    if frames.is_empty() {
        return Err(err("frame sequence contains no frames"));
    }
    Ok((frames, fps))
}

/// Maps an engine error onto the stable error code the service and CLI
/// report.
pub fn error_code(err: &EngineError) -> &'static str {
    match err {
        EngineError::Registry(RegistryError::InvalidName) => "InvalidName",
        EngineError::Registry(RegistryError::UnknownIdentity(_)) => "UnknownIdentity",
        EngineError::Registry(RegistryError::MalformedSample(_)) => "MalformedSample",
        EngineError::Registry(RegistryError::IncompleteEnrollment { .. }) => {
            "IncompleteEnrollment"
        }
        EngineError::Registry(RegistryError::AlreadyEnrolled(_)) => "AlreadyEnrolled",
        EngineError::Registry(RegistryError::InstrumentFailure(_)) => "InstrumentFailure",
        EngineError::Registry(RegistryError::CorruptLog { .. }) => "CorruptLog",
        EngineError::Registry(_) => "StorageFailure",
        EngineError::Audio(AudioError::AllSilent) => "AllSilent",
        EngineError::Audio(AudioError::AudioTooShort { .. }) => "AudioTooShort",
        EngineError::Audio(AudioError::SampleRateMismatch { .. }) => "SampleRateMismatch",
        EngineError::Audio(_) => "MalformedSample",
        EngineError::Speaker(SpeakerError::NotEnrolled) => "NotEnrolled",
        EngineError::Speaker(SpeakerError::InsufficientSpeech { .. }) => "InsufficientSpeech",
        EngineError::Speaker(SpeakerError::Audio(AudioError::AllSilent)) => "AllSilent",
        EngineError::Speaker(_) => "SpeakerError",
        EngineError::Face(FaceError::NotEnrolled) => "NotEnrolled",
        EngineError::Face(FaceError::EmptyProbe) => "EmptyProbe",
        EngineError::Face(FaceError::TooFewFrames { .. }) => "TooFewFrames",
        EngineError::Face(_) => "MalformedSample",
        EngineError::Keystroke(KeystrokeError::NoModel) => "NotEnrolled",
        EngineError::Keystroke(KeystrokeError::ProbeTooShort { .. }) => "ProbeTooShort",
        EngineError::Keystroke(KeystrokeError::TooFewKeystrokes { .. }) => "TooFewKeystrokes",
        EngineError::Keystroke(_) => "MalformedSample",
        EngineError::Pad(PadError::DigestMismatch) => "DigestMismatch",
        EngineError::Pad(PadError::Audio(AudioError::AllSilent)) => "AllSilent",
        EngineError::Pad(_) => "PadError",
        EngineError::Eval(_) => "EvalError",
        EngineError::InstrumentUnavailable(_) => "InstrumentUnavailable",
        EngineError::UnsupportedPayload(_) => "UnsupportedPayload",
        EngineError::Config(_) => "ConfigError",
    }
}
