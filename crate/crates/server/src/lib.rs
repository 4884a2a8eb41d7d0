//! JSON-over-HTTP front end for [`Engine`].

pub mod script;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use personagram_core::corpus::FilterQuery;
use personagram_core::engine::{
    DraftChange, Engine, EngineError, ErrorClass, NewSession, NewTile, SelectionChange, SessionPatch, UiEvent,
    DEFAULT_GENERATION_COUNT,
};
use personagram_core::session::metrics_csv;
use personagram_core::settings::{Settings, SettingsError};

/// Error body: `{code, message, detail}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Value,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Box<ErrorBody>,
}

impl ApiError {
    fn validation(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: Box::new(ErrorBody {
                code: "validation_error".into(),
                message: message.into(),
                detail: Value::Null,
            }),
        }
    }
}

pub fn status_for(class: ErrorClass) -> StatusCode {
    match class {
        ErrorClass::Validation => StatusCode::BAD_REQUEST,
        ErrorClass::NotFound => StatusCode::NOT_FOUND,
        ErrorClass::NotAllowed => StatusCode::METHOD_NOT_ALLOWED,
        ErrorClass::Upstream => StatusCode::BAD_GATEWAY,
        ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError {
            status: status_for(e.class()),
            body: Box::new(ErrorBody {
                code: e.code().to_string(),
                message: e.to_string(),
                detail: e.detail(),
            }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::warn!(code = %self.body.code, message = %self.body.message, "request failed");
        }
        (self.status, Json(*self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// JSON body, where an empty body means `T::default()`.
fn body_or_default<T: DeserializeOwned + Default>(bytes: &Bytes) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    body(bytes)
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

fn ok<T: Serialize>(value: T) -> Response {
    Json(value).into_response()
}

fn created<T: Serialize>(value: T) -> Response {
    (StatusCode::CREATED, Json(value)).into_response()
}

pub fn router(engine: Engine, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/personas", get(list_personas))
        .route("/personas/{id}", get(show_persona))
        .route("/facets", get(facets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).put(put_session))
        .route("/sessions/{id}/tiles", post(add_tile))
        .route("/tiles/{id}/infer", post(infer))
        .route("/cards/{id}/swap", post(swap))
        .route("/cards/{id}/discard", post(discard))
        .route("/cards/{id}/features", post(features))
        .route("/sessions/{id}/selections", post(selections))
        .route("/sessions/{id}/draft", get(get_draft).put(put_draft))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/events", post(ui_event))
        .route("/sessions/{id}/chat/threads", post(create_thread))
        .route("/threads/{id}/messages", post(post_message))
        .with_state(engine);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn list_personas(
    State(engine): State<Engine>,
    Query(params): Query<Vec<(String, String)>>,
) -> ApiResult<Response> {
    let mut grouped: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (path, value) in params {
        grouped
            .entry(path)
            .or_default()
            .extend(value.split('|').map(|v| v.trim().to_string()));
    }
    let query = FilterQuery::from_pairs(grouped).map_err(EngineError::from)?;
    let ids = engine.filter_personas(&query);
    Ok(ok(json!({"count": ids.len(), "ids": ids})))
}

async fn show_persona(State(engine): State<Engine>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(engine.preview(&id)?))
}

async fn facets(State(engine): State<Engine>) -> Response {
    ok(engine.facets())
}

async fn create_session(State(engine): State<Engine>, bytes: Bytes) -> ApiResult<Response> {
    let request: NewSession = body_or_default(&bytes)?;
    Ok(created(engine.create_session(request).await?))
}

async fn get_session(State(engine): State<Engine>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(engine.session(&id).await?))
}

async fn put_session(State(engine): State<Engine>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let patch: SessionPatch = body(&bytes)?;
    Ok(ok(engine.update_session(&id, patch).await?))
}

async fn add_tile(State(engine): State<Engine>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let request: NewTile = body(&bytes)?;
    Ok(created(engine.add_tile(&id, request).await?))
}

async fn infer(State(engine): State<Engine>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(engine.infer(&id).await?))
}

async fn swap(State(engine): State<Engine>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(engine.swap(&id).await?))
}

async fn discard(State(engine): State<Engine>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(engine.discard(&id).await?))
}

async fn features(State(engine): State<Engine>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(engine.features(&id).await?))
}

async fn selections(State(engine): State<Engine>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let change: SelectionChange = body(&bytes)?;
    Ok(ok(engine.change_selection(&id, change).await?))
}

async fn get_draft(State(engine): State<Engine>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(engine.draft(&id).await?))
}

async fn put_draft(State(engine): State<Engine>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let change: DraftChange = body(&bytes)?;
    Ok(ok(engine.update_draft(&id, change).await?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    #[serde(default)]
    n: Option<usize>,
}

async fn generate(State(engine): State<Engine>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let request: GenerateRequest = body_or_default(&bytes)?;
    let entry = engine
        .generate(&id, request.n.unwrap_or(DEFAULT_GENERATION_COUNT))
        .await?;
    Ok(created(entry))
}

#[derive(Debug, Default, Deserialize)]
struct MetricsQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn metrics(
    State(engine): State<Engine>,
    Path(id): Path<String>,
    Query(q): Query<MetricsQuery>,
) -> ApiResult<Response> {
    let m = engine.metrics(&id).await?;
    match q.format.as_deref() {
        None | Some("json") => Ok(ok(m)),
        Some("csv") => {
            let csv = metrics_csv(std::slice::from_ref(&m));
            Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
        }
        Some(other) => Err(ApiError::validation(format!(
            "unknown format `{other}`; expected json or csv"
        ))),
    }
}

async fn ui_event(State(engine): State<Engine>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let event: UiEvent = body(&bytes)?;
    Ok(created(engine.record_ui_event(&id, event).await?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewThread {
    persona_ids: Vec<String>,
}

async fn create_thread(State(engine): State<Engine>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let request: NewThread = body(&bytes)?;
    Ok(created(engine.create_thread(&id, request.persona_ids).await?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewMessage {
    text: String,
}

async fn post_message(State(engine): State<Engine>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let request: NewMessage = body(&bytes)?;
    Ok(ok(engine.post_message(&id, &request.text).await?))
}

/// Build the engine from `settings` and serve until interrupted.
pub async fn serve(settings: &Settings) -> Result<(), ServeError> {
    let engine = settings.engine()?;
    let addr: SocketAddr = format!("{}:{}", settings.host, settings.port)
        .parse()
        .map_err(|e| ServeError::Bind(format!("{}:{}: {e}", settings.host, settings.port)))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServeError::Bind(format!("{addr}: {e}")))?;
    tracing::info!(%addr, personas = engine.corpus().len(), "listening");
    axum::serve(listener, router(engine, settings.static_dir.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServeError::Bind(e.to_string()))
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Settings(#[from] SettingsError),
    #[error("cannot listen on {0}")]
    Bind(String),
}
