//! HTTP/JSON surface over [`Engine`]. Every handler drives the same engine
//! code path the CLI uses.
//!
//! Routes (bodies JSON, binary payloads base64):
//!
//! ```text
//! POST /learners                               register a learner
//! POST /learners/{id}/enroll/{modality}        submit samples, optionally finalize
//! POST /learners/{id}/verify/{modality}        verify a probe
//! POST /pad/{modality}                         presentation-attack check
//! POST /activities/{id}/report                 build + persist the trust report
//! GET  /activities/{id}/report                 fetch the stored report verbatim
//! GET  /health                                 liveness + available instruments
//! ```

use std::sync::Arc;

use axum::body::Body;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64_STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::engine::{error_code, Engine, EngineError, SamplePayload};
use crate::keystroke::KeyEvent;
use crate::registry::RegistryError;
use crate::types::Modality;

/// Maximum request body size (base64 payloads included).
pub const MAX_BODY_BYTES: usize = 50 * 1024 * 1024;

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Debug, Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: String,
}

struct ApiError(EngineError);

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> ApiError {
        ApiError(e)
    }
}

fn status_for(err: &EngineError) -> StatusCode {
    match err {
        EngineError::Registry(RegistryError::UnknownIdentity(_)) => StatusCode::NOT_FOUND,
        EngineError::Registry(RegistryError::AlreadyEnrolled(_))
        | EngineError::Registry(RegistryError::IncompleteEnrollment { .. }) => {
            StatusCode::CONFLICT
        }
        EngineError::Registry(RegistryError::Io(_))
        | EngineError::Registry(RegistryError::Json(_))
        | EngineError::Registry(RegistryError::CorruptLog { .. }) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
        EngineError::InstrumentUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        EngineError::Speaker(crate::speaker::SpeakerError::NotEnrolled)
        | EngineError::Face(crate::face::FaceError::NotEnrolled)
        | EngineError::Keystroke(crate::keystroke::KeystrokeError::NoModel) => {
            StatusCode::CONFLICT
        }
        _ => StatusCode::BAD_REQUEST,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        let body = ErrorBody {
            error: ErrorDetail {
                code: error_code(&self.0),
                message: self.0.to_string(),
            },
        };
        (status, Json(body)).into_response()
    }
}

/// One sample on the wire; exactly one representation must be present.
#[derive(Debug, Clone, Deserialize, Serialize, Default)]
pub struct WireSample {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wav_base64: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames_pgm_base64: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<KeyEvent>>,
}

impl WireSample {
    pub fn from_payload(payload: &SamplePayload) -> WireSample {
        match payload {
            SamplePayload::Wav(bytes) => WireSample {
                wav_base64: Some(BASE64_STANDARD.encode(bytes)),
                ..WireSample::default()
            },
            SamplePayload::PgmFrames { frames, fps } => WireSample {
                frames_pgm_base64: Some(
                    frames.iter().map(|f| BASE64_STANDARD.encode(f)).collect(),
                ),
                fps: Some(*fps),
                ..WireSample::default()
            },
            SamplePayload::Keystrokes(events) => WireSample {
                events: Some(events.clone()),
                ..WireSample::default()
            },
        }
    }

    pub fn into_payload(self) -> Result<SamplePayload, EngineError> {
        let bad = |m: &str| EngineError::UnsupportedPayload(m.to_string());
        if let Some(b64) = self.wav_base64 {
            let bytes = BASE64_STANDARD
                .decode(b64.as_bytes())
                .map_err(|e| bad(&format!("wav_base64: {e}")))?;
            return Ok(SamplePayload::Wav(bytes));
        }
        if let Some(frames) = self.frames_pgm_base64 {
            let fps = self.fps.ok_or_else(|| bad("frames need an fps field"))?;
            let decoded: Result<Vec<Vec<u8>>, _> = frames
                .iter()
                .map(|f| BASE64_STANDARD.decode(f.as_bytes()))
                .collect();
            return Ok(SamplePayload::PgmFrames {
                frames: decoded.map_err(|e| bad(&format!("frames_pgm_base64: {e}")))?,
                fps,
            });
        }
        if let Some(events) = self.events {
            return Ok(SamplePayload::Keystrokes(events));
        }
        Err(bad(
            "sample needs one of wav_base64, frames_pgm_base64, or events",
        ))
    }
}

#[derive(Debug, Deserialize)]
struct RegisterRequest {
    display_name: String,
}

#[derive(Debug, Deserialize)]
struct EnrollRequest {
    session_id: String,
    samples: Vec<WireSample>,
    /// Finalize after submitting when the enrollment is complete.
    #[serde(default)]
    finalize: bool,
}

#[derive(Debug, Serialize)]
struct EnrollResponse {
    status: crate::registry::EnrollmentStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    templates: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct VerifyRequest {
    #[serde(default)]
    activity_id: Option<String>,
    sample: WireSample,
}

#[derive(Debug, Deserialize)]
struct PadRequest {
    #[serde(default)]
    activity_id: Option<String>,
    sample: WireSample,
}

#[derive(Debug, Deserialize)]
struct ReportRequest {
    identity: String,
}

fn parse_modality(raw: &str) -> Result<Modality, ApiError> {
    Modality::parse(raw).ok_or_else(|| {
        ApiError(EngineError::UnsupportedPayload(format!(
            "unknown modality '{raw}'"
        )))
    })
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<crate::engine::Health> {
    Json(engine.health())
}

async fn register(
    State(engine): State<Arc<Engine>>,
    Json(req): Json<RegisterRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let identity = engine.register_learner(&req.display_name)?;
    Ok((StatusCode::CREATED, Json(identity)))
}

async fn enroll(
    State(engine): State<Arc<Engine>>,
    Path((id, modality)): Path<(String, String)>,
    Json(req): Json<EnrollRequest>,
) -> Result<Json<EnrollResponse>, ApiError> {
    let modality = parse_modality(&modality)?;
    let mut status = engine.enrollment_status(&id, modality)?;
    for sample in req.samples {
        let payload = sample.into_payload()?;
        status = engine.submit_enrollment(&id, modality, &req.session_id, &payload)?;
    }
    let templates = if req.finalize {
        Some(engine.finalize_enrollment(&id, modality)?.len())
    } else {
        None
    };
    Ok(Json(EnrollResponse { status, templates }))
}

async fn verify(
    State(engine): State<Arc<Engine>>,
    Path((id, modality)): Path<(String, String)>,
    Json(req): Json<VerifyRequest>,
) -> Result<Json<crate::types::VerificationOutcome>, ApiError> {
    let modality = parse_modality(&modality)?;
    let payload = req.sample.into_payload()?;
    let outcome = engine.verify(&id, modality, &payload, req.activity_id.as_deref())?;
    Ok(Json(outcome))
}

async fn pad(
    State(engine): State<Arc<Engine>>,
    Path(modality): Path<String>,
    Json(req): Json<PadRequest>,
) -> Result<Json<crate::types::PadOutcome>, ApiError> {
    let modality = parse_modality(&modality)?;
    let payload = req.sample.into_payload()?;
    if payload.modality() != modality {
        return Err(ApiError(EngineError::UnsupportedPayload(format!(
            "payload is {}, endpoint is {}",
            payload.modality(),
            modality
        ))));
    }
    let outcome = engine.pad_check(&payload, req.activity_id.as_deref())?;
    Ok(Json(outcome))
}

async fn build_report(
    State(engine): State<Arc<Engine>>,
    Path(activity): Path<String>,
    Json(req): Json<ReportRequest>,
) -> Result<Response, ApiError> {
    engine.build_report(&activity, &req.identity)?;
    // Serve the persisted bytes so POST and GET surfaces are identical.
    let bytes = engine
        .get_report_bytes(&activity)?
        .expect("report was just persisted");
    Ok(report_response(bytes))
}

async fn get_report(
    State(engine): State<Arc<Engine>>,
    Path(activity): Path<String>,
) -> Result<Response, ApiError> {
    match engine.get_report_bytes(&activity)? {
        Some(bytes) => Ok(report_response(bytes)),
        None => Ok((
            StatusCode::NOT_FOUND,
            Json(ErrorBody {
                error: ErrorDetail {
                    code: "ReportNotFound",
                    message: format!("no report for activity '{activity}'"),
                },
            }),
        )
            .into_response()),
    }
}

fn report_response(bytes: Vec<u8>) -> Response {
    Response::builder()
        .status(StatusCode::OK)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(bytes))
        .expect("static response parts are valid")
}

/// Builds the service router over a shared engine.
pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/learners", post(register))
        .route("/learners/{id}/enroll/{modality}", post(enroll))
        .route("/learners/{id}/verify/{modality}", post(verify))
        .route("/pad/{modality}", post(pad))
        .route("/activities/{id}/report", post(build_report).get(get_report))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(engine)
}

/// Binds the configured listen address and serves until shutdown.
pub async fn serve(engine: Arc<Engine>) -> std::io::Result<()> {
    let addr = engine.config().listen.clone();
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(engine)).await
}
