//! JSON-over-HTTP API for the authoring assistant.
//!
//! | route                | body                          |
//! |----------------------|-------------------------------|
//! | `POST /api/score`    | `{text}`                      |
//! | `POST /api/structure`| `{text, backend?, shots?}`    |
//! | `POST /api/metrics`  | `{candidate, reference}`      |
//! | `GET /api/health`    |                               |

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use reportsmith_core::ctqrs::{CtqrsEngine, RULE_TABLE_VERSION};
use reportsmith_core::metrics::{EmbeddingProvider, MetricReport, ProviderError};
use reportsmith_core::{parse_sections, render_report, SectionKind, StructuredReport};
use reportsmith_gateway::GenerationResult;

use crate::commands::{structure_text, ExemplarPool};
use crate::config::{AppConfig, ResolvedBackend};

/// Immutable after startup.
pub struct AppState {
    pub config: AppConfig,
    pub engine: CtqrsEngine,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub backends: BTreeMap<String, ResolvedBackend>,
    pub pool: ExemplarPool,
}

impl AppState {
    /// Resolves every configured backend up front.
    pub fn new(config: AppConfig) -> Result<Self, String> {
        let engine = config.engine()?;
        let embedder = config.embedder()?;
        let backends = config
            .backends
            .keys()
            .map(|name| Ok((name.clone(), config.backend(Some(name))?)))
            .collect::<Result<_, String>>()?;
        Ok(Self { config, engine, embedder, backends, pool: ExemplarPool::builtin() })
    }

    fn backend(&self, name: Option<&str>) -> Result<ResolvedBackend, ApiError> {
        match name {
            None => Ok(self.backends[&self.config.default_backend].clone()),
            Some(n) => match self.backends.get(n) {
                Some(b) => Ok(b.clone()),
                None => self.config.backend(Some(n)).map_err(ApiError::bad_request),
            },
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, message: message.into() }
    }
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        let status = match e {
            ProviderError::TimedOut => StatusCode::GATEWAY_TIMEOUT,
            _ => StatusCode::BAD_GATEWAY,
        };
        Self { status, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(json!({ "error": self.message }))).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn non_empty(field: &str, s: &str) -> Result<(), ApiError> {
    if s.trim().is_empty() {
        return Err(ApiError::bad_request(format!("`{field}` must be non-empty text")));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreRequest {
    text: String,
}

#[derive(Serialize)]
pub struct ScoreResponse {
    /// Same bytes the `score` subcommand prints.
    pub breakdown: Box<RawValue>,
    pub missing_fields: Vec<SectionKind>,
    pub report: StructuredReport,
}

/// The score payload for `text`; shared with the CLI.
pub fn score_response(engine: &CtqrsEngine, text: &str) -> ScoreResponse {
    let report = parse_sections(text);
    let raw = engine.score(&report).to_json();
    ScoreResponse {
        breakdown: RawValue::from_string(raw).expect("breakdown JSON is valid"),
        missing_fields: report.missing_fields.iter().copied().collect(),
        report,
    }
}

async fn score(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: ScoreRequest = parse_body(&body)?;
    non_empty("text", &req.text)?;
    Ok(axum::Json(score_response(&state.engine, &req.text)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureRequest {
    text: String,
    #[serde(default)]
    backend: Option<String>,
    #[serde(default)]
    shots: Option<usize>,
}

#[derive(Serialize)]
struct StructureResponse {
    backend: String,
    report: Option<StructuredReport>,
    rendered: Option<String>,
    missing_fields: Vec<SectionKind>,
    raw: String,
    parse_error: Option<String>,
    retry_count: u32,
    latency: f64,
}

async fn structure(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: StructureRequest = parse_body(&body)?;
    non_empty("text", &req.text)?;
    let backend = state.backend(req.backend.as_deref())?;
    let shots = req.shots.unwrap_or(0);
    let st = state.clone();
    let name = backend.name.clone();
    let result: GenerationResult =
        tokio::task::spawn_blocking(move || structure_text(&backend, &st.pool, &req.text, shots))
            .await
            .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })??;
    Ok(axum::Json(StructureResponse {
        backend: name,
        rendered: result.report.as_ref().map(render_report),
        missing_fields: result.report.as_ref().map(|r| r.missing_fields.iter().copied().collect()).unwrap_or_default(),
        report: result.report,
        raw: result.raw_text,
        parse_error: result.parse_error,
        retry_count: result.retry_count,
        latency: result.latency.as_secs_f64(),
    })
    .into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsRequest {
    candidate: String,
    reference: String,
}

async fn metrics(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: MetricsRequest = parse_body(&body)?;
    let st = state.clone();
    let report = tokio::task::spawn_blocking(move || {
        MetricReport::compute(&req.candidate, &req.reference, Some(st.embedder.as_ref()))
    })
    .await
    .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })??;
    Ok(axum::Json(report).into_response())
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let backends: Vec<&str> = state.backends.keys().map(String::as_str).collect();
    axum::Json(json!({
        "status": "ok",
        "backends": backends,
        "default_backend": state.config.default_backend,
        "rule_table": RULE_TABLE_VERSION,
    }))
    .into_response()
}

async fn not_found() -> Response {
    (StatusCode::NOT_FOUND, axum::Json(json!({ "error": "no such route" }))).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/api/score", post(score))
        .route("/api/structure", post(structure))
        .route("/api/metrics", post(metrics))
        .route("/api/health", get(health))
        .fallback(not_found)
        .with_state(state.clone());
    let origins: Vec<HeaderValue> =
        state.config.service.allowed_origins.iter().filter_map(|o| o.parse().ok()).collect();
    if !origins.is_empty() {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    app
}

/// Serves until ctrl-c. The state outlives the runtime so HTTP backends
/// are never torn down on an async thread.
pub fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let app = router(state.clone());
    let result = rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    drop(rt);
    drop(state);
    result
}
