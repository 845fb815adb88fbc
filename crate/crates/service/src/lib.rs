//! HTTP API over a directory of Cinema databases.
//!
//! | route | result |
//! |---|---|
//! | `GET /api/filters` | filter registry JSON, with an `ETag` |
//! | `GET /api/databases` | sorted database ids |
//! | `GET /api/databases/{id}/index` | axes, distinct values per axis, row count |
//! | `GET /api/databases/{id}/preview?channel=depth&phi=..` | PNG preview of one channel |
//! | `POST /api/execute` | runs a session request, returns PNG or `.gbuf` bytes |
//!
//! Errors are JSON bodies `{code, message, details}`. Every request builds its
//! own pipeline, so responses never depend on earlier requests.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use darkroom_core::pipeline::Registry;
use darkroom_core::session::{self, SessionError, SessionRequest};
use serde_json::json;
use sha2::{Digest, Sha256};

struct AppState {
    root: PathBuf,
    registry: Arc<Registry>,
    filters: Bytes,
    etag: HeaderValue,
}

/// An error response: the session error's status and `{code, message, details}` body.
pub struct ApiError(pub SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(self.0.to_json())).into_response()
    }
}

fn internal(code: &str, message: String) -> Response {
    log::error!("{message}");
    let body = json!({ "code": code, "message": message, "details": {} });
    (StatusCode::INTERNAL_SERVER_ERROR, Json(body)).into_response()
}

/// Router serving the databases found directly below `root`.
pub fn router(root: impl Into<PathBuf>) -> Router {
    let registry = Arc::new(Registry::standard());
    let body = Bytes::from(serde_json::to_vec(&registry.to_json()).expect("registry JSON"));
    let etag = format!("\"{}\"", hex::encode(Sha256::digest(&body)));
    let state = Arc::new(AppState {
        root: root.into(),
        registry,
        filters: body,
        etag: HeaderValue::from_str(&etag).expect("hex is a valid header value"),
    });
    Router::new()
        .route("/api/filters", get(filters))
        .route("/api/databases", get(databases))
        .route("/api/databases/{id}/index", get(index))
        .route("/api/databases/{id}/preview", get(preview))
        .route("/api/execute", post(execute))
        .with_state(state)
}

/// Serves `router(root)` on an already bound listener until the task is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, root: impl Into<PathBuf>) -> std::io::Result<()> {
    axum::serve(listener, router(root)).await
}

async fn filters(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    let cached = headers.get(header::IF_NONE_MATCH).is_some_and(|v| v == state.etag);
    let mut response = if cached {
        StatusCode::NOT_MODIFIED.into_response()
    } else {
        ([(header::CONTENT_TYPE, "application/json")], state.filters.clone()).into_response()
    };
    response.headers_mut().insert(header::ETAG, state.etag.clone());
    response
}

async fn databases(State(state): State<Arc<AppState>>) -> Response {
    match session::list_databases(&state.root) {
        Ok(ids) => Json(ids).into_response(),
        Err(e) => internal("io_error", format!("{}: {e}", state.root.display())),
    }
}

/// Runs blocking work (file reads, pipeline kernels) off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, SessionError> + Send + 'static,
) -> Result<T, Response> {
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => result.map_err(|e| ApiError(e).into_response()),
        Err(e) => Err(internal("internal", format!("worker failed: {e}"))),
    }
}

async fn index(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let result = blocking(move || {
        let db = session::open_database(&state.root, &id)?;
        Ok(session::index_json(&id, &db))
    })
    .await;
    match result {
        Ok(body) => Json(body).into_response(),
        Err(r) => r,
    }
}

fn image_response(rendered: session::Rendered) -> Response {
    ([(header::CONTENT_TYPE, rendered.content_type)], rendered.bytes).into_response()
}

/// `channel` names the channel (default `depth`); every other query key is an axis value.
async fn preview(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Response {
    let result = blocking(move || {
        let mut query = query;
        let channel = query.remove("channel").unwrap_or_else(|| "depth".to_owned());
        let mut axes: Vec<(String, String)> = query.into_iter().collect();
        axes.sort();
        let mut select = session::Selector::new();
        for (axis, raw) in axes {
            let v: f64 = raw
                .parse()
                .map_err(|_| SessionError::BadRequest(format!("axis `{axis}`: `{raw}` is not a number")))?;
            select.insert(axis, v);
        }
        let request = SessionRequest {
            database: id.clone(),
            select: session::Selection::One(select),
            pipeline: json!({
                "schema": 1,
                "nodes": [{ "id": "src", "type": "source", "params": { "channel": channel } }],
                "edges": []
            }),
            sink: "src:channel".into(),
            format: session::OutputFormat::Png8,
            range: None,
        };
        let db = session::open_database(&state.root, &id)?;
        session::execute(&db, &request, state.registry.clone())
    })
    .await;
    result.map_or_else(|r| r, image_response)
}

async fn execute(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request: SessionRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return ApiError(SessionError::BadRequest(format!("invalid request: {e}"))).into_response(),
    };
    log::info!("execute {} on {}", request.sink, request.database);
    let result = blocking(move || {
        let db = session::open_database(&state.root, &request.database)?;
        session::execute(&db, &request, state.registry.clone())
    })
    .await;
    result.map_or_else(|r| r, image_response)
}
