//! HTTP/JSON front for the review queue.
//!
//! - `GET /api/tasks/next?reviewer=<id>`: 200 with a task payload, 204 when
//!   nothing is waiting.
//! - `POST /api/tasks/{task_id}/verdict`: 200 with the decided task, 404
//!   unknown task, 409 already decided or leased to someone else, 400 bad
//!   body.
//! - `GET /api/stats`: pending/confirmed/rejected totals and per platform.
//! - Anything else is served from the static directory, if one is given.

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use amused_core::model::TaskVerdict;
use amused_core::verification::{ReviewError, ReviewQueue};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("server I/O error: {0}")]
    Io(#[from] io::Error),
}

type Shared = Arc<ReviewQueue>;

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let status = match &e {
            ReviewError::QueueEmpty => StatusCode::NO_CONTENT,
            ReviewError::TaskNotFound(_) => StatusCode::NOT_FOUND,
            ReviewError::AlreadyDecided(_) | ReviewError::LeaseHeldByOther { .. } => StatusCode::CONFLICT,
            ReviewError::InvalidVerdict | ReviewError::ReviewerMissing => StatusCode::BAD_REQUEST,
            ReviewError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{e}");
        }
        ApiError(status, e.to_string())
    }
}

/// Queue calls take a mutex and write files, so keep them off the async
/// workers.
async fn blocking<T, F>(queue: &Shared, f: F) -> Result<T, ApiError>
where
    F: FnOnce(&ReviewQueue) -> Result<T, ReviewError> + Send + 'static,
    T: Send + 'static,
{
    let queue = Arc::clone(queue);
    tokio::task::spawn_blocking(move || f(&queue))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct NextQuery {
    #[serde(default)]
    reviewer: String,
}

async fn next_task(State(queue): State<Shared>, Query(q): Query<NextQuery>) -> Response {
    match blocking(&queue, move |qu| qu.next_task(&q.reviewer)).await {
        Ok(payload) => Json(payload).into_response(),
        Err(ApiError(StatusCode::NO_CONTENT, _)) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
struct VerdictBody {
    verdict: TaskVerdict,
    #[serde(default)]
    reviewer: String,
    #[serde(default)]
    note: String,
}

async fn submit_verdict(
    State(queue): State<Shared>,
    UrlPath(task_id): UrlPath<String>,
    body: Result<Json<VerdictBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    let task = blocking(&queue, move |q| {
        q.submit_verdict(&task_id, body.verdict, &body.reviewer, &body.note)
    })
    .await?;
    Ok(Json(task).into_response())
}

async fn stats(State(queue): State<Shared>) -> Result<Response, ApiError> {
    let stats = blocking(&queue, |q| Ok(q.stats())).await?;
    Ok(Json(stats).into_response())
}

pub fn router(queue: Arc<ReviewQueue>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/tasks/{task_id}/verdict", post(submit_verdict))
        .route("/api/stats", get(stats))
        .with_state(queue);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ApiError(StatusCode::NOT_FOUND, "no review UI is being served".into()) }),
    }
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => ServeError::PortInUse(addr.port()),
        _ => ServeError::Io(e),
    })
}

/// Serves until `shutdown` resolves. In-flight requests finish first; every
/// verdict is on disk by the time its response is sent.
pub async fn serve(
    listener: TcpListener,
    queue: Arc<ReviewQueue>,
    static_dir: Option<&Path>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let app = router(queue, static_dir);
    log::info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}
