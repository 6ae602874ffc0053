//! JSON search service: `GET /api/search` and `GET /api/doc/{id}`.

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{middleware, Json, Router};
use exsearch_core::pipeline::{SearchEngine, SerpMode};
use exsearch_core::Error as CoreError;
use log::{error, info, warn};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::Notify;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub const VERSION_HEADER: &str = "x-artifact-version";
/// Longest wait for in-flight requests after a shutdown signal.
pub const SHUTDOWN_GRACE: Duration = Duration::from_secs(5);

pub struct AppState {
    pub engine: SearchEngine,
    pub default_mode: SerpMode,
    pub allow_text: bool,
    pub artifact_version: String,
}

#[derive(Debug, Deserialize)]
pub struct SearchParams {
    q: Option<String>,
    mode: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DocBody {
    pub doc_id: String,
    pub title: Option<String>,
    /// Body length in bytes.
    pub char_length: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

fn bad_request(msg: impl Into<String>) -> Response {
    let body = ErrorBody {
        error: msg.into(),
        id: None,
    };
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

fn internal(err: impl std::fmt::Display) -> Response {
    let id = uuid::Uuid::new_v4().to_string();
    error!("request {id} failed: {err}");
    let body = ErrorBody {
        error: "internal error".into(),
        id: Some(id),
    };
    (StatusCode::INTERNAL_SERVER_ERROR, Json(body)).into_response()
}

async fn search(State(state): State<Arc<AppState>>, Query(params): Query<SearchParams>) -> Response {
    let q = params.q.unwrap_or_default();
    if q.trim().is_empty() {
        return bad_request("missing or empty query parameter `q`");
    }
    let mode = match params.mode.as_deref() {
        None => state.default_mode,
        Some(m) => match m.parse::<SerpMode>() {
            Ok(m) => m,
            Err(e) => return bad_request(e.to_string()),
        },
    };
    let s = Arc::clone(&state);
    match tokio::task::spawn_blocking(move || s.engine.serp(&q, mode)).await {
        Ok(Ok(payload)) => Json(payload).into_response(),
        Ok(Err(CoreError::UnanswerableQuery)) => {
            bad_request("query has no searchable terms after preprocessing")
        }
        Ok(Err(e)) => internal(e),
        Err(e) => internal(e),
    }
}

async fn doc(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some(d) = state.engine.store.get(&id) else {
        let body = ErrorBody {
            error: format!("unknown document `{id}`"),
            id: None,
        };
        return (StatusCode::NOT_FOUND, Json(body)).into_response();
    };
    Json(DocBody {
        doc_id: d.raw.doc_id.clone(),
        title: d.raw.title.clone(),
        char_length: d.body_len(),
        text: state.allow_text.then(|| d.raw.body.clone()),
    })
    .into_response()
}

pub fn cors_layer(origin: Option<&str>) -> anyhow::Result<CorsLayer> {
    let allow = match origin {
        None | Some("*") => AllowOrigin::any(),
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o)?),
    };
    Ok(CorsLayer::new().allow_origin(allow).allow_methods(Any).allow_headers(Any))
}

pub fn router(state: Arc<AppState>, cors: CorsLayer) -> Router {
    let version = HeaderValue::from_str(&state.artifact_version)
        .unwrap_or_else(|_| HeaderValue::from_static("unknown"));
    Router::new()
        .route("/api/search", get(search))
        .route("/api/doc/{id}", get(doc))
        .with_state(state)
        .layer(middleware::map_response(move |mut res: Response| {
            let version = version.clone();
            async move {
                res.headers_mut().insert(VERSION_HEADER, version);
                res
            }
        }))
        .layer(cors)
}

/// Serve until `shutdown` resolves, then give in-flight requests up to
/// [`SHUTDOWN_GRACE`] to finish.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let signalled = Arc::new(Notify::new());
    let notify = Arc::clone(&signalled);
    let server = axum::serve(listener, app).with_graceful_shutdown(async move {
        shutdown.await;
        info!("shutting down");
        notify.notify_one();
    });
    tokio::select! {
        r = server => r,
        _ = async {
            signalled.notified().await;
            tokio::time::sleep(SHUTDOWN_GRACE).await;
        } => {
            warn!("requests still running after {SHUTDOWN_GRACE:?}; exiting anyway");
            Ok(())
        }
    }
}

/// Resolves on ctrl-c or, on unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        if let Err(e) = tokio::signal::ctrl_c().await {
            warn!("cannot listen for ctrl-c: {e}");
            std::future::pending::<()>().await;
        }
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(e) => {
                warn!("cannot listen for SIGTERM: {e}");
                std::future::pending::<()>().await;
            }
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
