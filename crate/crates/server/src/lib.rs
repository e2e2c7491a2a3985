//! HTTP API over a [`citelens_core::Engine`].
//!
//! Every response body is a JSON object carrying `schema_version`. Errors
//! have the shape `{"schema_version":1,"error":{"code":"not_found","message":"..."}}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use citelens_core::activity::EventRecord;
use citelens_core::augment::{AugmentationType, TypeToggles};
use citelens_core::citeparse::CitationKey;
use citelens_core::corpus::PaperId;
use citelens_core::engine::{SettingsUpdate, SCHEMA_VERSION};
use citelens_core::strategies::SectionFilter;
use citelens_core::{Engine, EngineError};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_DATA_DIR: &str = "./data";

pub type SharedEngine = Arc<RwLock<Engine>>;

#[derive(Debug)]
pub struct ApiError {
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: "invalid_input", message: message.into() }
    }

    pub fn status(&self) -> StatusCode {
        status_for(self.code)
    }
}

/// Transport status for an error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "not_found" => StatusCode::NOT_FOUND,
        "invalid_input" => StatusCode::BAD_REQUEST,
        "conflict" => StatusCode::CONFLICT,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        Self { code: e.code(), message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == "internal" {
            tracing::error!(message = %self.message, "request failed");
        }
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "code": self.code, "message": self.message },
        });
        (self.status(), Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

/// Serializes `value` and stamps it with the schema version. Non-object
/// values are wrapped as `items`.
fn versioned<T: Serialize>(value: &T) -> ApiResult {
    let v = serde_json::to_value(value).map_err(|e| ApiError { code: "internal", message: e.to_string() })?;
    let mut obj = match v {
        Value::Object(map) => map,
        other => {
            let mut map = serde_json::Map::new();
            map.insert("items".into(), other);
            map
        }
    };
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    Ok(Json(Value::Object(obj)))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("invalid JSON body: {e}")))
}

fn read(engine: &SharedEngine) -> std::sync::RwLockReadGuard<'_, Engine> {
    engine.read().unwrap_or_else(|p| p.into_inner())
}

fn write(engine: &SharedEngine) -> std::sync::RwLockWriteGuard<'_, Engine> {
    engine.write().unwrap_or_else(|p| p.into_inner())
}

pub fn router(engine: SharedEngine) -> Router {
    Router::new()
        .route("/papers", post(ingest))
        .route("/papers/{id}/view", get(view))
        .route("/papers/{id}/markers/{mid}/card", get(card))
        .route("/events", post(record_event))
        .route("/history", get(history))
        .route("/library", get(library))
        .route("/library/{id}", delete(unsave))
        .route("/library/{id}/card", get(library_card))
        .route("/settings", get(get_settings).put(put_settings))
        .route("/eval/strategies", post(eval_strategies))
        .route("/stats/usage", get(usage))
        .with_state(engine)
}

async fn ingest(State(engine): State<SharedEngine>, body: Bytes) -> ApiResult {
    let outcome = write(&engine).ingest_bytes(&body)?;
    versioned(&outcome)
}

#[derive(Debug, Deserialize)]
struct ViewQuery {
    window: Option<usize>,
    /// Comma-separated augmentation types to show; others are hidden.
    toggles: Option<String>,
}

fn parse_toggles(list: &str) -> Result<TypeToggles, ApiError> {
    let mut toggles = TypeToggles::all(false);
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let t: AugmentationType = serde_json::from_value(Value::String(name.to_owned()))
            .map_err(|_| ApiError::invalid(format!("unknown augmentation type {name:?}")))?;
        toggles.set(t, true);
    }
    Ok(toggles)
}

async fn view(State(engine): State<SharedEngine>, Path(id): Path<String>, Query(q): Query<ViewQuery>) -> ApiResult {
    let toggles = q.toggles.as_deref().map(parse_toggles).transpose()?;
    let view = read(&engine).view_with(&PaperId::new(id), q.window, toggles.as_ref())?;
    versioned(&view)
}

#[derive(Debug, Deserialize)]
struct CardQuery {
    key: Option<String>,
}

async fn card(
    State(engine): State<SharedEngine>,
    Path((id, mid)): Path<(String, String)>,
    Query(q): Query<CardQuery>,
) -> ApiResult {
    let key = q.key.as_deref().map(CitationKey::parse);
    let outcome = write(&engine).open_card(&PaperId::new(id), &mid, key.as_ref(), None)?;
    versioned(&outcome)
}

async fn record_event(State(engine): State<SharedEngine>, body: Bytes) -> ApiResult {
    let record: EventRecord = parse_body(&body)?;
    let event = write(&engine).record(record)?;
    versioned(&json!({ "seq": event.seq, "event": event }))
}

#[derive(Debug, Deserialize)]
struct WindowQuery {
    window: Option<usize>,
}

async fn history(State(engine): State<SharedEngine>, Query(q): Query<WindowQuery>) -> ApiResult {
    let engine = read(&engine);
    let items = engine.history(q.window)?;
    versioned(&json!({ "window": q.window.unwrap_or(engine.state().window), "items": items }))
}

async fn library(State(engine): State<SharedEngine>) -> ApiResult {
    versioned(&json!({ "items": read(&engine).library() }))
}

async fn unsave(State(engine): State<SharedEngine>, Path(id): Path<String>) -> ApiResult {
    let event = write(&engine).remove_from_library(&PaperId::new(id))?;
    versioned(&json!({ "seq": event.seq, "event": event }))
}

async fn library_card(State(engine): State<SharedEngine>, Path(id): Path<String>) -> ApiResult {
    let card = read(&engine).library_card(&PaperId::new(id))?;
    versioned(&card)
}

async fn get_settings(State(engine): State<SharedEngine>) -> ApiResult {
    versioned(&read(&engine).settings())
}

async fn put_settings(State(engine): State<SharedEngine>, body: Bytes) -> ApiResult {
    let update: SettingsUpdate = parse_body(&body)?;
    let settings = write(&engine).update_settings(update)?;
    versioned(&settings)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalRequest {
    doc_id: PaperId,
    #[serde(default)]
    peer_ids: Vec<PaperId>,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default)]
    seed: u64,
    /// "intro_related" (default) or "all".
    #[serde(default)]
    sections: Option<String>,
}

fn default_k() -> usize {
    5
}

pub fn section_filter(name: Option<&str>) -> Result<SectionFilter, String> {
    match name {
        None | Some("intro_related") => Ok(SectionFilter::default()),
        Some("all") => Ok(SectionFilter::All),
        Some(other) => Err(format!("unknown section filter {other:?}")),
    }
}

async fn eval_strategies(State(engine): State<SharedEngine>, body: Bytes) -> ApiResult {
    let req: EvalRequest = parse_body(&body)?;
    let filter = section_filter(req.sections.as_deref()).map_err(ApiError::invalid)?;
    let report = read(&engine).evaluate_strategies(&req.doc_id, &req.peer_ids, req.k, req.seed, filter)?;
    versioned(&report)
}

async fn usage(State(engine): State<SharedEngine>) -> ApiResult {
    versioned(&read(&engine).usage())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub port: u16,
    pub data_dir: PathBuf,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { port: DEFAULT_PORT, data_dir: PathBuf::from(DEFAULT_DATA_DIR) }
    }
}

impl ServerConfig {
    /// Reads `CITELENS_PORT` and `CITELENS_DATA_DIR`.
    pub fn from_env() -> Result<Self, String> {
        let mut config = Self::default();
        if let Ok(port) = std::env::var("CITELENS_PORT") {
            config.port = port.parse().map_err(|_| format!("CITELENS_PORT is not a port number: {port:?}"))?;
        }
        if let Ok(dir) = std::env::var("CITELENS_DATA_DIR") {
            config.data_dir = PathBuf::from(dir);
        }
        Ok(config)
    }
}

/// Opens the data directory and serves until the process is stopped.
pub async fn serve(config: ServerConfig) -> std::io::Result<()> {
    let engine = Engine::open(&config.data_dir).map_err(|e| std::io::Error::other(e.to_string()))?;
    if let Some(c) = engine.recovery() {
        tracing::warn!(line = c.line, last_valid_seq = c.last_valid_seq, "recovered from a damaged event log");
    }
    let app = router(Arc::new(RwLock::new(engine)));
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, app).await
}
