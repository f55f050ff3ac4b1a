//! JSON-over-HTTP front end.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use super::{DataResponse, MiddlewareError, ScoreUpdate, Transport, TrustedMiddleware};
use crate::ontology::DuaRecord;
use crate::policy::DataRequest;
use crate::store::Namespaces;
use crate::trust::TrustRecord;

impl IntoResponse for MiddlewareError {
    fn into_response(self) -> Response {
        let status = match &self {
            MiddlewareError::NotFound(_) => StatusCode::NOT_FOUND,
            MiddlewareError::Invalid(_) => StatusCode::BAD_REQUEST,
            MiddlewareError::Conflict(_) => StatusCode::CONFLICT,
            MiddlewareError::Replay(_) | MiddlewareError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Tm = State<Arc<TrustedMiddleware>>;

async fn blocking<T: Send + 'static>(
    tm: Arc<TrustedMiddleware>,
    f: impl FnOnce(&TrustedMiddleware) -> Result<T, MiddlewareError> + Send + 'static,
) -> Result<T, MiddlewareError> {
    tokio::task::spawn_blocking(move || f(&tm))
        .await
        .map_err(|e| MiddlewareError::Io(format!("worker failed: {e}")))?
}

async fn requests(State(tm): Tm, Json(req): Json<DataRequest>) -> Result<Json<DataResponse>, MiddlewareError> {
    blocking(tm, move |tm| tm.handle_request(&req)).await.map(Json)
}

/// Accepts an absolute IRI or a `prefix:local` name.
async fn trust(State(tm): Tm, Path(principal): Path<String>) -> Result<Json<TrustRecord>, MiddlewareError> {
    let iri = match principal.split_once(':') {
        Some((prefix, local)) if !local.starts_with("//") => Namespaces::default()
            .expand(prefix, local)
            .unwrap_or_else(|| principal.clone()),
        _ => principal.clone(),
    };
    tm.trust_record(&iri)
        .map(Json)
        .ok_or_else(|| MiddlewareError::NotFound(format!("<{iri}> is not registered")))
}

async fn peer_scores(
    State(tm): Tm,
    Json(updates): Json<Vec<ScoreUpdate>>,
) -> Result<Json<serde_json::Value>, MiddlewareError> {
    let applied = blocking(tm, move |tm| tm.receive_scores(&updates)).await?;
    Ok(Json(json!({ "applied": applied })))
}

async fn admin_dua(State(tm): Tm, Json(dua): Json<DuaRecord>) -> Result<Json<serde_json::Value>, MiddlewareError> {
    blocking(tm, move |tm| tm.rewrite_dua(&dua)).await?;
    Ok(Json(json!({ "rewritten": true })))
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(tm: Arc<TrustedMiddleware>) -> Router {
    Router::new()
        .route("/requests", post(requests))
        .route("/trust/{principal}", get(trust))
        .route("/peers/scores", post(peer_scores))
        .route("/admin/dua", post(admin_dua))
        .route("/healthz", get(healthz))
        .with_state(tm)
}

/// Delivers queued score updates every `interval` until the runtime stops.
pub fn spawn_propagation(
    tm: Arc<TrustedMiddleware>,
    transport: Arc<dyn Transport>,
    interval: Duration,
) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(interval);
        loop {
            tick.tick().await;
            if tm.pending_updates().values().all(|&n| n == 0) {
                continue;
            }
            let (tm, transport) = (tm.clone(), transport.clone());
            let _ = tokio::task::spawn_blocking(move || tm.propagate_scores(transport.as_ref())).await;
        }
    })
}

/// Serves until the listener fails or the future is dropped.
pub async fn serve(tm: Arc<TrustedMiddleware>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(tm)).await
}
