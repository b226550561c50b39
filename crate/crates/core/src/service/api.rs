//! Routes, wire types and error mapping.

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::experiments::{ExperimentStatus, RunState};
use super::AppState;
use crate::ensemble::{to_wire, FlagRecord};
use crate::error::{Error, FieldError};
use crate::eval::{ExperimentGrid, ExperimentOptions};
use crate::label::Theme;
use crate::persona::{PersonaAttrs, PersonaProfile, PersonaRecord, Role};

// ---- wire types -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaResponse {
    pub persona: PersonaProfile,
    pub narrative: String,
    pub flags: Vec<FlagRecord>,
}

impl From<PersonaRecord> for PersonaResponse {
    fn from(r: PersonaRecord) -> Self {
        PersonaResponse {
            flags: to_wire(&r.flags),
            persona: r.profile,
            narrative: r.narrative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub role: Role,
    pub text: String,
    pub flags: Vec<FlagRecord>,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaDetail {
    pub persona: PersonaProfile,
    pub narrative: String,
    pub flags: Vec<FlagRecord>,
    pub turns: Vec<TurnRecord>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub persona_id: String,
    pub reply: String,
    pub flags: Vec<FlagRecord>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DetectRequest {
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub flags: Vec<FlagRecord>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct AbilitiesQuery {
    pub theme: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilitiesResponse {
    pub theme: Theme,
    pub drivers: Vec<String>,
    pub barriers: Vec<String>,
    pub supports: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResponse {
    pub min_age: u32,
    pub max_age: u32,
    pub occupations: Vec<String>,
    pub themes: Vec<Theme>,
    pub detection_enabled: bool,
    pub max_detect_chars: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CompareRequest {
    #[serde(default)]
    pub grid: ExperimentGrid,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareAccepted {
    pub id: String,
    pub state: RunState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

// ---- errors -----------------------------------------------------------------

#[derive(Debug)]
pub enum ApiError {
    Core(Error),
    TooLarge(String),
    BadRequest(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Core(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::TooLarge(e.body_text())
        } else {
            ApiError::BadRequest(e.body_text())
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, message, fields) = match self {
            ApiError::TooLarge(m) => (StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large", m, vec![]),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad_request", m, vec![]),
            ApiError::Core(e) => {
                let message = e.to_string();
                match e {
                    Error::Validation(fields) => (StatusCode::UNPROCESSABLE_ENTITY, "validation", message, fields),
                    Error::InvalidInput(_) | Error::Degenerate(_) => {
                        (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", message, vec![])
                    }
                    Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", message, vec![]),
                    Error::Generation(_) => (StatusCode::BAD_GATEWAY, "generation_failed", message, vec![]),
                    _ => {
                        log::error!("internal error: {message}");
                        (StatusCode::INTERNAL_SERVER_ERROR, "internal", message, vec![])
                    }
                }
            }
        };
        let body = ErrorBody {
            error: kind.to_string(),
            message,
            fields,
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> crate::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Core(Error::invalid(format!("worker failed: {e}"))))?
        .map_err(ApiError::Core)
}

// ---- handlers ---------------------------------------------------------------

async fn create_persona(
    State(state): State<AppState>,
    body: std::result::Result<Json<PersonaAttrs>, JsonRejection>,
) -> ApiResult<Json<PersonaResponse>> {
    let Json(attrs) = body?;
    let s = state.clone();
    let record = blocking(move || s.engine().create_persona(&attrs, &s.catalog().current())).await?;
    Ok(Json(record.into()))
}

async fn get_persona(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<PersonaDetail>> {
    let (record, session) = state.engine().get(&id)?;
    Ok(Json(PersonaDetail {
        persona: record.profile,
        narrative: record.narrative,
        flags: to_wire(&record.flags),
        turns: session
            .turns
            .into_iter()
            .map(|t| TurnRecord {
                role: t.role,
                flags: to_wire(&t.flags),
                text: t.text,
                timestamp: t.timestamp,
            })
            .collect(),
    }))
}

async fn chat(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: std::result::Result<Json<ChatRequest>, JsonRejection>,
) -> ApiResult<Json<ChatResponse>> {
    let Json(req) = body?;
    let message = req.message.unwrap_or_default();
    let s = state.clone();
    let persona_id = id.clone();
    let outcome = blocking(move || s.engine().chat_turn(&persona_id, &message)).await?;
    Ok(Json(ChatResponse {
        persona_id: id,
        reply: outcome.reply,
        flags: to_wire(&outcome.flags),
    }))
}

async fn detect(
    State(state): State<AppState>,
    body: std::result::Result<Json<DetectRequest>, JsonRejection>,
) -> ApiResult<Json<DetectResponse>> {
    let Json(req) = body?;
    let limit = state.config().max_detect_chars;
    let n = req.text.chars().count();
    if n > limit {
        return Err(ApiError::TooLarge(format!("text has {n} characters; the limit is {limit}")));
    }
    let detector = state.detector();
    let flags = blocking(move || Ok(detector.detect(&req.text))).await?;
    Ok(Json(DetectResponse { flags: to_wire(&flags) }))
}

async fn abilities(
    State(state): State<AppState>,
    query: std::result::Result<Query<AbilitiesQuery>, QueryRejection>,
) -> ApiResult<Json<AbilitiesResponse>> {
    let theme_error = |m: &str| ApiError::Core(Error::Validation(vec![FieldError::new("theme", m)]));
    let Query(q) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let raw = q.theme.ok_or_else(|| theme_error("required"))?;
    let theme: Theme = raw
        .parse()
        .map_err(|_| theme_error("must be one of: family, education, employment"))?;
    let sel = state.catalog().theme(theme)?;
    Ok(Json(AbilitiesResponse {
        theme,
        drivers: sel.drivers,
        barriers: sel.barriers,
        supports: sel.supports,
    }))
}

async fn config(State(state): State<AppState>) -> Json<ConfigResponse> {
    let c = state.config();
    Json(ConfigResponse {
        min_age: c.persona.min_age,
        max_age: c.persona.max_age,
        occupations: c.persona.occupations.clone(),
        themes: Theme::ALL.to_vec(),
        detection_enabled: c.detection_enabled,
        max_detect_chars: c.max_detect_chars,
    })
}

async fn compare(
    State(state): State<AppState>,
    body: std::result::Result<Json<CompareRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<CompareAccepted>)> {
    let Json(req) = body?;
    req.grid.validate()?;
    let mut options = ExperimentOptions::default();
    if let Some(alpha) = req.alpha {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Validation(vec![FieldError::new("alpha", "must be in (0, 1)")]).into());
        }
        options.alpha = alpha;
    }
    let id = state.experiments().submit(req.grid, options);
    Ok((
        StatusCode::ACCEPTED,
        Json(CompareAccepted {
            id,
            state: RunState::Pending,
        }),
    ))
}

async fn experiment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ExperimentStatus>> {
    state
        .experiments()
        .status(&id)
        .map(Json)
        .ok_or_else(|| Error::NotFound(format!("experiment {id}")).into())
}

pub fn router(state: AppState) -> Router {
    // Room for the character limit in four-byte UTF-8 plus JSON framing.
    let body_limit = state.config().max_detect_chars * 4 + 64 * 1024;
    Router::new()
        .route("/api/personas", post(create_persona))
        .route("/api/personas/{id}", get(get_persona))
        .route("/api/personas/{id}/chat", post(chat))
        .route("/api/detect", post(detect))
        .route("/api/abilities", get(abilities))
        .route("/api/config", get(config))
        .route("/api/experiments/compare", post(compare))
        .route("/api/experiments/{id}", get(experiment))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}
