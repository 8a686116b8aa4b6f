//! Blinded MOS listening-test service.
//!
//! Raters get a session with a shuffled playlist of opaque clip ids, fetch
//! each clip as WAV, and post integer scores from 0 (worst) to 10
//! (excellent). Sessions and ratings are appended to a JSONL log that is
//! replayed on start. The admin report unblinds and averages the latest
//! rating per (session, clip).
//!
//! ```text
//! POST /api/sessions        {"rater": "..."}                    -> {"session_id", "playlist": [ids]}
//! GET  /api/clips/{id}                                          -> audio/wav
//! POST /api/ratings         {"session_id", "clip_id", "score"}  -> {"ok": true} | {"error": "..."}
//! GET  /api/report          Authorization: Bearer <token>      -> text/csv
//! ```

mod api;
pub mod pool;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

pub use api::router;
pub use pool::{parse_clip_name, Clip, ClipPool};
pub use store::{read_log, Event, Rating, Session, Snapshot, Store};

pub const ADMIN_TOKEN_ENV: &str = "MOS_ADMIN_TOKEN";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no clips available; the clip directory has no <stem>__<algorithm>__<variant>.wav files")]
    EmptyPool,
    #[error("unknown session")]
    UnknownSession,
    #[error("clip is not part of this session")]
    UnknownClip,
    #[error("invalid score: {0}")]
    InvalidScore(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("missing or wrong admin token")]
    Unauthorized,
    #[error("report disabled: set {ADMIN_TOKEN_ENV} to enable it")]
    ReportDisabled,
    #[error("no ratings recorded yet")]
    NoRatings,
    #[error("rating log line {line} is corrupt: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::EmptyPool => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::UnknownSession | ServiceError::UnknownClip => StatusCode::NOT_FOUND,
            ServiceError::InvalidScore(_) | ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::ReportDisabled => StatusCode::FORBIDDEN,
            ServiceError::NoRatings => StatusCode::NOT_FOUND,
            ServiceError::CorruptLog { .. } | ServiceError::Io(_) | ServiceError::Internal(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub clip_dir: PathBuf,
    pub log_path: PathBuf,
    /// Served at `/` when set (the listening-test web app).
    pub static_dir: Option<PathBuf>,
    /// Enables `GET /api/report` when set.
    pub admin_token: Option<String>,
    /// Fixed token seed; `None` draws from the OS.
    pub seed: Option<u64>,
}

impl Config {
    /// Log defaults to `<clip_dir>/ratings.jsonl`; the admin token comes
    /// from `MOS_ADMIN_TOKEN`.
    pub fn new(clip_dir: impl Into<PathBuf>) -> Self {
        let clip_dir = clip_dir.into();
        Self {
            log_path: clip_dir.join("ratings.jsonl"),
            clip_dir,
            static_dir: None,
            admin_token: std::env::var(ADMIN_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            seed: None,
        }
    }
}

pub struct AppState {
    pub store: Store,
    pub admin_token: Option<String>,
}

pub fn open(config: &Config) -> Result<Arc<AppState>, ServiceError> {
    let pool = ClipPool::scan(&config.clip_dir)?;
    let store = Store::open(pool, &config.log_path, config.seed)?;
    Ok(Arc::new(AppState {
        store,
        admin_token: config.admin_token.clone(),
    }))
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(config: Config, addr: SocketAddr) -> Result<(), ServiceError> {
    let state = open(&config)?;
    let app = router(state, config.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, clips = %config.clip_dir.display(), "MOS service listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
