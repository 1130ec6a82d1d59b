//! HTTP API for the curation front end. Reads are open; every POST needs
//! `Authorization: Bearer <token>`.

use std::net::SocketAddr;
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;
use serde_json::json;

use crate::curation::{DecisionError, DecisionRequest};
use crate::pipeline::{Pipeline, PipelineError};
use crate::records::{ExtractionRecord, ReviewState, Task};
use crate::report::{self, Metric};
use crate::store::{Stage, Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    PortBusy(String),
    #[error("store {0} is locked by another process")]
    StoreLocked(PathBuf),
    #[error("environment variable {0} must hold the API token")]
    MissingToken(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct AppState {
    pub pipeline: Pipeline,
    pub store: Mutex<Store>,
    pub token: String,
    pub actor: String,
}

type Shared = Arc<AppState>;

pub struct ApiError(StatusCode, serde_json::Value);

impl ApiError {
    fn new(status: StatusCode, message: impl std::fmt::Display) -> Self {
        ApiError(status, json!({ "error": message.to_string() }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::UnknownJob(_) | PipelineError::UnknownConference(_) => StatusCode::NOT_FOUND,
            PipelineError::ReviewPending { remaining } => {
                return ApiError(StatusCode::CONFLICT, json!({ "error": e.to_string(), "remaining": remaining }));
            }
            PipelineError::StageOrderViolation { .. } => StatusCode::CONFLICT,
            PipelineError::Decision(d) => match d {
                DecisionError::NotFound(_) => StatusCode::NOT_FOUND,
                DecisionError::StaleVersion { .. } | DecisionError::AlreadyDecided { .. } => StatusCode::CONFLICT,
                DecisionError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            },
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e)
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking store/pipeline work off the async executor.
async fn blocking<T: Send + 'static>(
    state: &Shared,
    f: impl FnOnce(&AppState) -> Result<T, PipelineError> + Send + 'static,
) -> ApiResult<T> {
    let s = state.clone();
    tokio::task::spawn_blocking(move || f(&s))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?
        .map_err(ApiError::from)
}

fn read_store(state: &AppState) -> std::sync::MutexGuard<'_, Store> {
    state.store.lock().unwrap_or_else(|p| p.into_inner())
}

async fn require_token(State(state): State<Shared>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if req.method() == axum::http::Method::POST {
        let given = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
        let ok = given.is_some_and(|g| constant_time_eq(g.as_bytes(), state.token.as_bytes()));
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn list_jobs(State(state): State<Shared>) -> Json<serde_json::Value> {
    let st = read_store(&state);
    Json(json!(st.state().jobs.values().collect::<Vec<_>>()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewJob {
    conference_key: String,
    #[serde(default)]
    until: Option<Stage>,
}

async fn create_job(State(state): State<Shared>, Json(body): Json<NewJob>) -> ApiResult<Response> {
    let key = body.conference_key.clone();
    let job = blocking(&state, move |s| s.pipeline.create_job(&s.store, &key, Utc::now())).await?;
    let until = body.until.unwrap_or(Stage::Review);
    let (s, id) = (state.clone(), job.id.clone());
    // Stage failures are recorded on the job and show up in GET /api/jobs.
    tokio::task::spawn_blocking(move || {
        if let Err(e) = s.pipeline.run_until(&s.store, &id, until, Utc::now()) {
            log::warn!("{id}: {e}");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

#[derive(Deserialize)]
struct QueueQuery {
    state: Option<ReviewState>,
    task: Option<Task>,
    conference: Option<String>,
}

async fn queue(State(state): State<Shared>, Query(q): Query<QueueQuery>) -> Json<Vec<ExtractionRecord>> {
    let st = read_store(&state);
    let mut items: Vec<ExtractionRecord> = st
        .state()
        .records
        .values()
        .filter(|r| q.state.is_none_or(|s| r.review_state == s))
        .filter(|r| q.task.is_none_or(|t| r.task == t))
        .filter(|r| q.conference.as_ref().is_none_or(|c| &r.conference_key == c))
        .cloned()
        .collect();
    items.sort_by(|a, b| {
        let pending = |r: &ExtractionRecord| r.review_state != ReviewState::NeedsReview;
        (pending(a), &a.conference_key, a.task, &a.id).cmp(&(pending(b), &b.conference_key, b.task, &b.id))
    });
    Json(items)
}

async fn get_record(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<ExtractionRecord>> {
    let st = read_store(&state);
    st.state()
        .records
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown record {id}")))
}

async fn decide(State(state): State<Shared>, Path(id): Path<String>, Json(req): Json<DecisionRequest>) -> ApiResult<Json<ExtractionRecord>> {
    let r = blocking(&state, move |s| s.pipeline.decide(&s.store, &id, &req, &s.actor, Utc::now())).await?;
    Ok(Json(r))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewBatch {
    job_id: String,
}

async fn create_batch(State(state): State<Shared>, Json(body): Json<NewBatch>) -> ApiResult<Response> {
    let batch = blocking(&state, move |s| s.pipeline.export(&s.store, &body.job_id, Utc::now())).await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "id": batch.id, "job_id": batch.job_id, "created_at": batch.created_at, "stats": batch.stats })),
    )
        .into_response())
}

async fn get_batch(State(state): State<Shared>, Path(file): Path<String>) -> ApiResult<Response> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, format!("unknown batch {file}"));
    let id = file.strip_suffix(".qs").ok_or_else(not_found)?;
    let st = read_store(&state);
    let batch = st.state().batches.get(id).ok_or_else(not_found)?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], batch.text.clone()).into_response())
}

#[derive(Deserialize)]
struct ReportQuery {
    series: String,
    metric: String,
}

async fn get_report(State(state): State<Shared>, Query(q): Query<ReportQuery>) -> ApiResult<Response> {
    let metric: Metric = q.metric.parse().map_err(|e: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;
    let st = read_store(&state);
    let csv = report::to_csv(&report::report(st.state(), &q.series, metric), metric);
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

/// Serves the built UI bundle, with `index.html` for unknown paths.
async fn static_file(State(state): State<Shared>, req: Request) -> Response {
    let Some(root) = state.pipeline.config.api.static_dir.clone() else {
        return ApiError::new(StatusCode::NOT_FOUND, "not found").into_response();
    };
    let rel = FsPath::new(req.uri().path().trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return ApiError::new(StatusCode::NOT_FOUND, "not found").into_response();
    }
    let mut path = root.join(rel);
    if !path.is_file() {
        path = root.join("index.html");
    }
    match std::fs::read(&path) {
        Ok(bytes) => {
            let ct = match path.extension().and_then(|e| e.to_str()) {
                Some("html") => "text/html; charset=utf-8",
                Some("js") => "text/javascript",
                Some("css") => "text/css",
                Some("json") => "application/json",
                Some("svg") => "image/svg+xml",
                _ => "application/octet-stream",
            };
            ([(header::CONTENT_TYPE, ct)], bytes).into_response()
        }
        Err(_) => ApiError::new(StatusCode::NOT_FOUND, "not found").into_response(),
    }
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/jobs", get(list_jobs).post(create_job))
        .route("/api/queue", get(queue))
        .route("/api/records/{id}", get(get_record))
        .route("/api/records/{id}/decision", post(decide))
        .route("/api/batches", post(create_batch))
        .route("/api/batches/{file}", get(get_batch))
        .route("/api/report", get(get_report))
        .fallback(static_file)
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Opens the store and builds the shared state; the token comes from the
/// environment variable named in the config.
pub fn app_state(pipeline: Pipeline) -> Result<AppState, ServeError> {
    let var = pipeline.config.api.token_env.clone();
    let token = std::env::var(&var).ok().filter(|t| !t.is_empty()).ok_or(ServeError::MissingToken(var))?;
    let store = match Store::open(&pipeline.config.store_dir) {
        Ok(s) => s,
        Err(StoreError::StoreLocked(p)) => return Err(ServeError::StoreLocked(p)),
        Err(e) => return Err(PipelineError::from(e).into()),
    };
    Ok(AppState { pipeline, store: Mutex::new(store), token, actor: "curator".into() })
}

pub async fn bind(addr: &str) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortBusy(addr.to_string()),
        _ => ServeError::Io(e),
    })
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> Result<(), ServeError> {
    let addr: SocketAddr = listener.local_addr()?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
