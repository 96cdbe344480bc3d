//! HTTP API over the harmonization engine.
//!
//! Sessions hold a source and a working pair of sheets in memory. Recodes run
//! as background jobs that clients poll; outputs are produced by the same
//! pipeline the command line uses, so both give identical bytes.

mod error;
mod extract;
mod routes;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde_json::json;

pub use error::{ApiError, ErrorBody};
pub use state::AppState;

use routes::{jobs, library, sessions};

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(2 * 60 * 60);
pub const DEFAULT_UPLOAD_LIMIT: usize = 1 << 30;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    /// Largest accepted upload, in bytes.
    pub upload_limit: usize,
    /// Where uploads and job outputs go. A temporary directory when unset.
    pub work_dir: Option<PathBuf>,
    /// Shared derived-variable library. In memory when unset.
    pub dvl_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            session_ttl: DEFAULT_SESSION_TTL,
            upload_limit: DEFAULT_UPLOAD_LIMIT,
            work_dir: None,
            dvl_dir: None,
        }
    }
}

pub fn router(state: AppState) -> Router {
    // JSON-escaped uploads can grow; leave headroom over the raw limit
    let body_limit = state.config().upload_limit.saturating_mul(2).saturating_add(1 << 20);
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/sessions", post(sessions::create))
        .route("/sessions/{id}", get(sessions::get).delete(sessions::delete))
        .route("/sessions/{id}/summary/{column}", get(sessions::summary))
        .route(
            "/sessions/{id}/sheets/{sheet}",
            get(sessions::get_sheet).put(sessions::put_sheet),
        )
        .route("/sessions/{id}/validation", get(sessions::validation))
        .route("/sessions/{id}/details-rows", post(sessions::add_details_row))
        .route(
            "/sessions/{id}/details-rows/{index}",
            delete(sessions::delete_details_row),
        )
        .route("/sessions/{id}/variable-rows", post(sessions::add_variable_row))
        .route(
            "/sessions/{id}/variable-rows/{index}",
            delete(sessions::delete_variable_row),
        )
        .route(
            "/sessions/{id}/derived",
            get(sessions::list_derived).post(sessions::put_derived),
        )
        .route("/sessions/{id}/derived-doc", get(sessions::derived_doc))
        .route("/sessions/{id}/persist", post(sessions::persist))
        .route("/sessions/{id}/recode", post(jobs::start))
        .route("/jobs/{id}", get(jobs::status))
        .route("/jobs/{id}/result", get(jobs::result))
        .route("/jobs/{id}/manifest", get(jobs::manifest))
        .route("/dvl", get(library::list).post(library::add))
        .route("/dvl-doc", get(library::export))
        .route("/dvl/{name}", get(library::show))
        .route("/expr/parse", post(library::parse))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// Spawns the task that drops idle sessions. It stops when the runtime does.
pub fn spawn_sweeper(state: AppState) {
    let every = state.sweep_interval();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            state.sweep_expired();
        }
    });
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::new(config).map_err(|e| std::io::Error::other(e.body.message))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    serve_on(listener, state).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    spawn_sweeper(state.clone());
    axum::serve(listener, router(state)).await
}
