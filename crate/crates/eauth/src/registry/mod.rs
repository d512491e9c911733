//! Persistent registry: identities, enrollment samples, write-once template
//! sets, per-activity instrument results, and an append-only audit log.
//!
//! Layout under the data root (all JSON, payloads content-addressed):
//!
//! ```text
//! identities/<id>.json
//! blobs/<sha256-hex>
//! samples/<identity>/<modality>/<blob>.json
//! templates/<identity>/<modality>/<n>.json
//! activities/<activity>/results.jsonl
//! activities/<activity>/report.json
//! audit.jsonl
//! ```
//!
//! Reads are lock-free; writes serialize behind one mutex (a stricter
//! discipline than the per-identity serialization the contract requires),
//! and the audit log has a single serialized appender.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::face::FaceEmbedding;
use crate::keystroke::TypingModel;
use crate::speaker::IVector;
use crate::trust::{InstrumentResult, TrustReport};
use crate::types::{Instrument, Modality};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("display name must be non-empty")]
    InvalidName,
    #[error("unknown identity: {0}")]
    UnknownIdentity(String),
    #[error("malformed sample: {0}")]
    MalformedSample(String),
    #[error("enrollment incomplete: {have} qualifying samples over {sessions} sessions, policy requires {need_samples} over {need_sessions}")]
    IncompleteEnrollment {
        have: usize,
        sessions: usize,
        need_samples: usize,
        need_sessions: usize,
    },
    #[error("identity already enrolled for {0}; templates are write-once")]
    AlreadyEnrolled(Modality),
    #[error("instrument failure during enrollment: {0}")]
    InstrumentFailure(String),
    #[error("audit log corrupt at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("storage document corrupt: {0}")]
    Json(#[from] serde_json::Error),
}

/// A registered learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identity {
    pub id: String,
    pub display_name: String,
    pub created_at: DateTime<Utc>,
}

/// Metadata of one stored biometric sample; the payload lives in the blob
/// store under `payload_ref`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiometricSample {
    pub modality: Modality,
    /// Content address (lowercase hex SHA-256) of the payload bytes.
    pub payload_ref: String,
    /// Seconds for voice/face, keystroke count for keystroke.
    pub duration_or_count: f64,
    pub captured_at: DateTime<Utc>,
    pub session_id: String,
}

/// Modality-specific enrollment artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TemplateBody {
    IVector(IVector),
    FaceEmbedding(FaceEmbedding),
    TypingModel(TypingModel),
}

impl TemplateBody {
    pub fn modality(&self) -> Modality {
        match self {
            TemplateBody::IVector(_) => Modality::Voice,
            TemplateBody::FaceEmbedding(_) => Modality::Face,
            TemplateBody::TypingModel(_) => Modality::Keystroke,
        }
    }
}

/// Write-once enrollment template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub identity: String,
    pub modality: Modality,
    pub session_id: String,
    pub body: TemplateBody,
    pub created_at: DateTime<Utc>,
}

/// Completeness policy for one modality's enrollment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentPolicy {
    pub modality: Modality,
    pub min_samples: usize,
    pub min_sessions: usize,
    /// Seconds (voice/face) or keystrokes (keystroke) each sample must
    /// reach to count toward completeness.
    pub min_payload: f64,
}

impl EnrollmentPolicy {
    pub fn default_for(modality: Modality) -> EnrollmentPolicy {
        match modality {
            Modality::Voice => EnrollmentPolicy {
                modality,
                min_samples: 15,
                min_sessions: 3,
                min_payload: 10.0,
            },
            Modality::Face => EnrollmentPolicy {
                modality,
                min_samples: 1,
                min_sessions: 1,
                min_payload: 5.0,
            },
            Modality::Keystroke => EnrollmentPolicy {
                modality,
                min_samples: 1,
                min_sessions: 1,
                min_payload: 750.0,
            },
        }
    }
}

/// Enrollment progress against a policy. Only samples meeting the
/// per-sample payload minimum count toward completeness, which keeps the
/// status monotone: adding a sample can never un-complete an enrollment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentStatus {
    pub modality: Modality,
    pub total_samples: usize,
    pub qualifying_samples: usize,
    pub distinct_sessions: usize,
    pub complete: bool,
    pub policy: EnrollmentPolicy,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Enroll,
    Verify,
    PadCheck,
    Fuse,
}

/// One audit record. `seq` is assigned by the appender and makes the
/// append order explicit on read-back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    #[serde(default)]
    pub seq: u64,
    pub event_kind: EventKind,
    pub identity: Option<String>,
    pub instrument: Instrument,
    pub outcome_summary: serde_json::Value,
    pub at: DateTime<Utc>,
}

/// Filesystem-backed store.
pub struct Store {
    root: PathBuf,
    write_lock: Mutex<()>,
    audit: Mutex<u64>, // next sequence number
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), RegistryError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RegistryError> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, RegistryError> {
        let root = root.into();
        for dir in ["identities", "blobs", "samples", "templates", "activities"] {
            fs::create_dir_all(root.join(dir))?;
        }
        let next_seq = match fs::read_to_string(root.join("audit.jsonl")) {
            Ok(text) => text.lines().filter(|l| !l.trim().is_empty()).count() as u64,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(e.into()),
        };
        Ok(Store {
            root,
            write_lock: Mutex::new(()),
            audit: Mutex::new(next_seq),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn identity_path(&self, id: &str) -> PathBuf {
        self.root.join("identities").join(format!("{id}.json"))
    }

    pub fn register_learner(&self, display_name: &str) -> Result<Identity, RegistryError> {
        if display_name.trim().is_empty() {
            return Err(RegistryError::InvalidName);
        }
        let identity = Identity {
            id: uuid::Uuid::new_v4().to_string(),
            display_name: display_name.to_string(),
            created_at: Utc::now(),
        };
        let _guard = self.write_lock.lock().unwrap();
        write_json_atomic(&self.identity_path(&identity.id), &identity)?;
        Ok(identity)
    }

    pub fn identity(&self, id: &str) -> Result<Identity, RegistryError> {
        let path = self.identity_path(id);
        if !path.exists() {
            return Err(RegistryError::UnknownIdentity(id.to_string()));
        }
        read_json(&path)
    }

    pub fn list_identities(&self) -> Result<Vec<Identity>, RegistryError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("identities"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                out.push(read_json(&path)?);
            }
        }
        out.sort_by_key(|identity: &Identity| identity.created_at);
        Ok(out)
    }

    pub fn put_blob(&self, bytes: &[u8]) -> Result<String, RegistryError> {
        let id = sha256_hex(bytes);
        let path = self.root.join("blobs").join(&id);
        if !path.exists() {
            let _guard = self.write_lock.lock().unwrap();
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, &path)?;
        }
        Ok(id)
    }

    pub fn get_blob(&self, blob_id: &str) -> Result<Vec<u8>, RegistryError> {
        Ok(fs::read(self.root.join("blobs").join(blob_id))?)
    }

    fn samples_dir(&self, identity: &str, modality: Modality) -> PathBuf {
        self.root
            .join("samples")
            .join(identity)
            .join(modality.as_str())
    }

    fn templates_dir(&self, identity: &str, modality: Modality) -> PathBuf {
        self.root
            .join("templates")
            .join(identity)
            .join(modality.as_str())
    }

    /// Stores a sample payload and its metadata, returning the updated
    /// enrollment status.
    pub fn submit_enrollment_sample(
        &self,
        identity: &str,
        modality: Modality,
        session_id: &str,
        payload: &[u8],
        duration_or_count: f64,
        policy: &EnrollmentPolicy,
    ) -> Result<(BiometricSample, EnrollmentStatus), RegistryError> {
        self.identity(identity)?;
        if payload.is_empty() {
            return Err(RegistryError::MalformedSample("empty payload".into()));
        }
        if duration_or_count <= 0.0 || duration_or_count.is_nan() {
            return Err(RegistryError::MalformedSample(
                "duration_or_count must be > 0".into(),
            ));
        }
        if session_id.trim().is_empty() {
            return Err(RegistryError::MalformedSample("empty session id".into()));
        }
        let payload_ref = self.put_blob(payload)?;
        let sample = BiometricSample {
            modality,
            payload_ref: payload_ref.clone(),
            duration_or_count,
            captured_at: Utc::now(),
            session_id: session_id.to_string(),
        };
        {
            let _guard = self.write_lock.lock().unwrap();
            let dir = self.samples_dir(identity, modality);
            fs::create_dir_all(&dir)?;
            write_json_atomic(&dir.join(format!("{payload_ref}.json")), &sample)?;
        }
        let status = self.enrollment_status(identity, modality, policy)?;
        Ok((sample, status))
    }

    pub fn samples(
        &self,
        identity: &str,
        modality: Modality,
    ) -> Result<Vec<BiometricSample>, RegistryError> {
        self.identity(identity)?;
        let dir = self.samples_dir(identity, modality);
        let mut out: Vec<BiometricSample> = Vec::new();
        if dir.exists() {
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    out.push(read_json(&path)?);
                }
            }
        }
        out.sort_by(|a, b| {
            a.captured_at
                .cmp(&b.captured_at)
                .then_with(|| a.payload_ref.cmp(&b.payload_ref))
        });
        Ok(out)
    }

    /// Completeness check: qualifying samples (payload at or above the
    /// policy minimum) and their distinct sessions, both at policy level.
    pub fn enrollment_status(
        &self,
        identity: &str,
        modality: Modality,
        policy: &EnrollmentPolicy,
    ) -> Result<EnrollmentStatus, RegistryError> {
        let samples = self.samples(identity, modality)?;
        let qualifying: Vec<&BiometricSample> = samples
            .iter()
            .filter(|s| s.duration_or_count >= policy.min_payload)
            .collect();
        let mut sessions: Vec<&str> = qualifying.iter().map(|s| s.session_id.as_str()).collect();
        sessions.sort_unstable();
        sessions.dedup();

        let mut warnings = Vec::new();
        // Session spacing is advisory only: flag sessions captured within a
        // day of each other instead of refusing them.
        let mut session_times: Vec<(&str, DateTime<Utc>)> = Vec::new();
        for s in &samples {
            match session_times.iter_mut().find(|(id, _)| *id == s.session_id) {
                Some(entry) => entry.1 = entry.1.min(s.captured_at),
                None => session_times.push((&s.session_id, s.captured_at)),
            }
        }
        session_times.sort_by_key(|(_, t)| *t);
        for pair in session_times.windows(2) {
            if pair[1].1 - pair[0].1 < chrono::Duration::days(1) {
                warnings.push(format!(
                    "sessions '{}' and '{}' were captured less than a day apart",
                    pair[0].0, pair[1].0
                ));
            }
        }

        let complete =
            qualifying.len() >= policy.min_samples && sessions.len() >= policy.min_sessions;
        Ok(EnrollmentStatus {
            modality,
            total_samples: samples.len(),
            qualifying_samples: qualifying.len(),
            distinct_sessions: sessions.len(),
            complete,
            policy: *policy,
            warnings,
        })
    }

    /// Runs the instrument's template builder over the stored samples and
    /// persists the resulting write-once template set.
    ///
    /// The builder receives every stored sample with its payload and
    /// returns one or more `(body, session_id)` pairs.
    pub fn finalize_enrollment(
        &self,
        identity: &str,
        modality: Modality,
        policy: &EnrollmentPolicy,
        builder: impl FnOnce(
            &[(BiometricSample, Vec<u8>)],
        ) -> Result<Vec<(TemplateBody, String)>, String>,
    ) -> Result<Vec<Template>, RegistryError> {
        let status = self.enrollment_status(identity, modality, policy)?;
        if !status.complete {
            return Err(RegistryError::IncompleteEnrollment {
                have: status.qualifying_samples,
                sessions: status.distinct_sessions,
                need_samples: policy.min_samples,
                need_sessions: policy.min_sessions,
            });
        }
        let dir = self.templates_dir(identity, modality);
        if dir.exists() && fs::read_dir(&dir)?.next().is_some() {
            return Err(RegistryError::AlreadyEnrolled(modality));
        }

        let mut with_payloads = Vec::new();
        for sample in self.samples(identity, modality)? {
            let payload = self.get_blob(&sample.payload_ref)?;
            with_payloads.push((sample, payload));
        }
        let bodies = builder(&with_payloads).map_err(RegistryError::InstrumentFailure)?;
        if let Some((body, _)) = bodies.iter().find(|(b, _)| b.modality() != modality) {
            return Err(RegistryError::InstrumentFailure(format!(
                "builder produced a {} template for a {modality} enrollment",
                body.modality()
            )));
        }

        let now = Utc::now();
        let templates: Vec<Template> = bodies
            .into_iter()
            .map(|(body, session_id)| Template {
                identity: identity.to_string(),
                modality,
                session_id,
                body,
                created_at: now,
            })
            .collect();

        let _guard = self.write_lock.lock().unwrap();
        fs::create_dir_all(&dir)?;
        for (i, t) in templates.iter().enumerate() {
            write_json_atomic(&dir.join(format!("{i:04}.json")), t)?;
        }
        Ok(templates)
    }

    /// All templates for `(identity, modality)`; empty when not enrolled.
    pub fn fetch_templates(
        &self,
        identity: &str,
        modality: Modality,
    ) -> Result<Vec<Template>, RegistryError> {
        self.identity(identity)?;
        let dir = self.templates_dir(identity, modality);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
        paths.sort();
        paths.iter().map(|p| read_json(p)).collect()
    }

    /// Appends an audit event, assigning its sequence number.
    pub fn record_audit_event(&self, mut event: AuditEvent) -> Result<AuditEvent, RegistryError> {
        use std::io::Write;
        let mut seq = self.audit.lock().unwrap();
        event.seq = *seq;
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("audit.jsonl"))?;
        let mut line = serde_json::to_string(&event)?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        *seq += 1;
        Ok(event)
    }

    /// Reads the whole audit log back in append order.
    pub fn read_audit_log(&self) -> Result<Vec<AuditEvent>, RegistryError> {
        let path = self.root.join("audit.jsonl");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: AuditEvent =
                serde_json::from_str(line).map_err(|e| RegistryError::CorruptLog {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            events.push(event);
        }
        Ok(events)
    }

    fn activity_dir(&self, activity_id: &str) -> PathBuf {
        self.root.join("activities").join(activity_id)
    }

    pub fn record_instrument_result(
        &self,
        activity_id: &str,
        result: &InstrumentResult,
    ) -> Result<(), RegistryError> {
        use std::io::Write;
        let _guard = self.write_lock.lock().unwrap();
        let dir = self.activity_dir(activity_id);
        fs::create_dir_all(&dir)?;
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("results.jsonl"))?;
        let mut line = serde_json::to_string(result)?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        Ok(())
    }

    pub fn activity_results(
        &self,
        activity_id: &str,
    ) -> Result<Vec<InstrumentResult>, RegistryError> {
        let path = self.activity_dir(activity_id).join("results.jsonl");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect()
    }

    pub fn put_trust_report(
        &self,
        activity_id: &str,
        report: &TrustReport,
    ) -> Result<(), RegistryError> {
        let _guard = self.write_lock.lock().unwrap();
        let dir = self.activity_dir(activity_id);
        fs::create_dir_all(&dir)?;
        // Reports are stored compact so the CLI and service surfaces emit
        // byte-identical JSON.
        let tmp = dir.join("report.tmp");
        fs::write(&tmp, serde_json::to_vec(report)?)?;
        fs::rename(&tmp, dir.join("report.json"))?;
        Ok(())
    }

    pub fn get_trust_report(
        &self,
        activity_id: &str,
    ) -> Result<Option<TrustReport>, RegistryError> {
        let path = self.activity_dir(activity_id).join("report.json");
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(read_json(&path)?))
    }

    /// Raw report bytes as stored (the byte-stable service surface).
    pub fn get_trust_report_bytes(
        &self,
        activity_id: &str,
    ) -> Result<Option<Vec<u8>>, RegistryError> {
        let path = self.activity_dir(activity_id).join("report.json");
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(fs::read(path)?))
    }
}
