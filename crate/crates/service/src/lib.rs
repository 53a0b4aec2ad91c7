//! HTTP JSON API over the file-backed user store.
//!
//! Every handler delegates to [`pfm_core::api::Engine`] on the blocking pool
//! and renders the result with the same canonical encoder the CLI uses.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use pfm_core::api::{render, ApiError, Engine, ErrorKind};
use pfm_core::chronicle::Stream;
use pfm_core::store::AppendOutcome;
use pfm_core::time::Timestamp;
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BuildStatus {
    Building,
    Failed { error: ApiError },
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    builds: Arc<Mutex<BTreeMap<String, BuildStatus>>>,
    ui_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(engine: Engine) -> Self {
        AppState {
            engine: Arc::new(engine),
            builds: Arc::default(),
            ui_dir: None,
        }
    }

    /// Serve static assets for `/ui` from this directory.
    pub fn with_ui_dir(mut self, dir: PathBuf) -> Self {
        self.ui_dir = Some(dir);
        self
    }
}

fn status_of(kind: ErrorKind) -> StatusCode {
    match kind {
        ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
        ErrorKind::NotFound => StatusCode::NOT_FOUND,
        ErrorKind::Conflict => StatusCode::CONFLICT,
        ErrorKind::Unprocessable => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

struct Failure(ApiError);

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure(e)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        json(status_of(self.0.kind), render(&self.0.body()))
    }
}

type Reply = Result<Response, Failure>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, Failure> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(ErrorKind::Internal, "task_failed", e.to_string()))?
        .map_err(Failure)
}

fn parse_body(body: &Bytes) -> Result<Value, Failure> {
    serde_json::from_slice(body).map_err(|e| Failure(ApiError::bad_request("invalid_json", e.to_string())))
}

fn query_time(q: &HashMap<String, String>, key: &str) -> Result<Option<Timestamp>, Failure> {
    q.get(key)
        .map(|s| {
            s.parse::<Timestamp>()
                .map_err(|e| Failure(ApiError::bad_request("invalid_timestamp", format!("{key}: {e}"))))
        })
        .transpose()
}

async fn post_event(
    State(st): State<AppState>,
    Path(user): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> Reply {
    let value = parse_body(&body)?;
    let enrich_now = q.get("enrich").is_some_and(|v| v == "now");
    let engine = st.engine.clone();
    let u = user.clone();
    let posted = blocking(move || engine.post_event(&u, value, enrich_now)).await?;
    if posted.enrichment == "pending" {
        let engine = st.engine.clone();
        let id = posted.event.id().to_string();
        tokio::task::spawn_blocking(move || {
            if let Err(e) = engine.enrich_event(&user, &id) {
                tracing::warn!(user = %user, event = %id, error = %e, "background enrichment failed");
            }
        });
    }
    let status = match posted.outcome {
        AppendOutcome::Created => StatusCode::CREATED,
        AppendOutcome::Existing => StatusCode::OK,
    };
    let mut resp = json(status, render(&posted.event));
    if let Ok(v) = HeaderValue::from_str(&posted.enrichment) {
        resp.headers_mut().insert("x-enrichment", v);
    }
    Ok(resp)
}

async fn get_chronicle(
    State(st): State<AppState>,
    Path(user): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Reply {
    let from = query_time(&q, "from")?;
    let to = query_time(&q, "to")?;
    let streams = q
        .get("stream")
        .map(|s| {
            s.split(',')
                .map(|p| p.trim().parse::<Stream>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure(ApiError::bad_request("invalid_stream", e.to_string())))
        })
        .transpose()?;
    let engine = st.engine.clone();
    let events = blocking(move || engine.query(&user, from, to, streams)).await?;
    Ok(json(StatusCode::OK, render(&events)))
}

async fn get_heatmap(
    State(st): State<AppState>,
    Path(user): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Reply {
    let need = |k: &str| {
        q.get(k)
            .cloned()
            .ok_or_else(|| Failure(ApiError::bad_request("missing_parameter", format!("query parameter `{k}` is required"))))
    };
    let (a, b, window) = (need("streamA")?, need("streamB")?, need("window")?);
    let csv = q.get("format").is_some_and(|f| f == "csv");
    let engine = st.engine.clone();
    let heatmap = blocking(move || engine.heatmap(&user, &a, &b, &window)).await?;
    if csv {
        return Ok((StatusCode::OK, [(header::CONTENT_TYPE, "text/csv")], heatmap.to_csv()).into_response());
    }
    Ok(json(StatusCode::OK, render(&heatmap)))
}

async fn post_verify(State(st): State<AppState>, Path(user): Path<String>, body: Bytes) -> Reply {
    let value = parse_body(&body)?;
    let engine = st.engine.clone();
    let rule = blocking(move || engine.verify(&user, value)).await?;
    Ok(json(StatusCode::OK, render(&rule)))
}

async fn post_build(
    State(st): State<AppState>,
    Path(user): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Reply {
    if !q.get("background").is_some_and(|v| v == "true") {
        let engine = st.engine.clone();
        let summary = blocking(move || engine.build_model(&user)).await?;
        return Ok(json(StatusCode::OK, render(&summary)));
    }
    if !st.engine.store.user_exists(&user) {
        return Err(ApiError::new(ErrorKind::NotFound, "unknown_user", format!("unknown user `{user}`")).into());
    }
    {
        let mut builds = st.builds.lock().expect("build table poisoned");
        if builds.get(&user) == Some(&BuildStatus::Building) {
            return Ok(json(StatusCode::ACCEPTED, render(&BuildStatus::Building)));
        }
        builds.insert(user.clone(), BuildStatus::Building);
    }
    let engine = st.engine.clone();
    let builds = st.builds.clone();
    tokio::task::spawn_blocking(move || {
        let result = engine.build_model(&user);
        let mut builds = builds.lock().expect("build table poisoned");
        match result {
            Ok(_) => builds.remove(&user),
            Err(error) => builds.insert(user, BuildStatus::Failed { error }),
        };
    });
    Ok(json(StatusCode::ACCEPTED, render(&BuildStatus::Building)))
}

async fn get_model(State(st): State<AppState>, Path(user): Path<String>) -> Reply {
    let status = st.builds.lock().expect("build table poisoned").get(&user).cloned();
    let engine = st.engine.clone();
    let u = user.clone();
    let model = blocking(move || engine.store.load_model(&u).map_err(ApiError::from)).await?;
    let label = match &status {
        None => "idle",
        Some(BuildStatus::Building) => "building",
        Some(BuildStatus::Failed { .. }) => "failed",
    };
    let mut resp = match (model, status) {
        (Some(m), _) => json(StatusCode::OK, render(&m)),
        (None, Some(BuildStatus::Building)) => json(StatusCode::ACCEPTED, render(&BuildStatus::Building)),
        (None, Some(BuildStatus::Failed { error })) => return Err(error.into()),
        (None, None) => {
            return Err(ApiError::new(ErrorKind::NotFound, "no_model", format!("no model for user `{user}`")).into())
        }
    };
    resp.headers_mut().insert("x-build-status", HeaderValue::from_static(label));
    Ok(resp)
}

async fn post_recommend(State(st): State<AppState>, Path(user): Path<String>, body: Bytes) -> Reply {
    let value = parse_body(&body)?;
    let engine = st.engine.clone();
    let rec = blocking(move || engine.recommend(&user, value)).await?;
    Ok(json(StatusCode::OK, render(&rec)))
}

async fn health() -> Response {
    json(StatusCode::OK, render(&serde_json::json!({"status": "ok"})))
}

const UI_FALLBACK: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>Personal food model</title></head>
<body><h1>Personal food model</h1>
<p>The web UI build is not installed. The JSON API is served under <code>/v1</code>; see docs/api.md.</p>
</body></html>
";

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn ui(State(st): State<AppState>, path: Option<Path<String>>) -> Response {
    let rel = path.map(|Path(p)| p).unwrap_or_default();
    let rel = if rel.is_empty() { "index.html".to_string() } else { rel };
    if let Some(dir) = &st.ui_dir {
        if !rel.split('/').any(|seg| seg == ".." || seg.is_empty()) {
            let file = dir.join(&rel);
            if let Ok(bytes) = tokio::fs::read(&file).await {
                return (StatusCode::OK, [(header::CONTENT_TYPE, content_type(&file))], bytes).into_response();
            }
        }
    }
    if rel == "index.html" {
        return (StatusCode::OK, [(header::CONTENT_TYPE, "text/html; charset=utf-8")], UI_FALLBACK).into_response();
    }
    StatusCode::NOT_FOUND.into_response()
}

async fn require_token(State(st): State<AppState>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if let Some(token) = &st.engine.cfg.service.bearer_token {
        let ok = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|v| v == token);
        if !ok {
            let err = ApiError::new(ErrorKind::BadRequest, "unauthorized", "missing or wrong bearer token");
            return json(StatusCode::UNAUTHORIZED, render(&err.body()));
        }
    }
    next.run(req).await
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/v1/users/{id}/events", post(post_event))
        .route("/v1/users/{id}/chronicle", get(get_chronicle))
        .route("/v1/users/{id}/heatmap", get(get_heatmap))
        .route("/v1/users/{id}/hypotheses/verify", post(post_verify))
        .route("/v1/users/{id}/model/build", post(post_build))
        .route("/v1/users/{id}/model", get(get_model))
        .route("/v1/users/{id}/recommendations", post(post_recommend))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .merge(api)
        .route("/health", get(health))
        .route("/ui", get(ui))
        .route("/ui/", get(ui))
        .route("/ui/{*path}", get(ui))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state)).await
}
