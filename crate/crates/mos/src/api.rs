use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use denoise_core::metrics::mos_csv;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::{AppState, ServiceError};

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/clips/{id}", get(clip))
        .route("/api/ratings", post(rate))
        .route("/api/report", get(report))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Deserialize)]
struct SessionRequest {
    #[serde(default)]
    rater: String,
}

#[derive(Serialize)]
struct SessionView {
    session_id: String,
    playlist: Vec<String>,
}

async fn create_session(
    State(app): Shared,
    body: Result<Json<SessionRequest>, JsonRejection>,
) -> Result<Json<SessionView>, ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let rater = req.rater.trim();
    if rater.is_empty() {
        return Err(ServiceError::BadRequest("rater label is required".into()));
    }
    let session = app.store.create_session(rater)?;
    Ok(Json(SessionView {
        session_id: session.session_id,
        playlist: session.playlist.into_iter().map(|e| e.id).collect(),
    }))
}

async fn clip(State(app): Shared, UrlPath(id): UrlPath<String>) -> Result<Response, ServiceError> {
    let file = app
        .store
        .snapshot()
        .clip(&id)
        .map(|e| e.clip.file.clone())
        .ok_or(ServiceError::UnknownClip)?;
    let bytes = tokio::fs::read(app.store.pool().path_of(&file)).await.map_err(|e| {
        tracing::error!(error = %e, "clip file unreadable");
        ServiceError::UnknownClip
    })?;
    Ok(([(header::CONTENT_TYPE, "audio/wav"), (header::CACHE_CONTROL, "no-store")], bytes).into_response())
}

#[derive(Deserialize)]
struct RatingRequest {
    session_id: String,
    clip_id: String,
    score: serde_json::Value,
    #[serde(default)]
    client_ts: Option<u64>,
}

fn parse_score(v: &serde_json::Value) -> Result<u8, ServiceError> {
    let n = v
        .as_i64()
        .ok_or_else(|| ServiceError::InvalidScore(format!("{v} is not an integer")))?;
    denoise_core::metrics::validate_score(n).map_err(|e| ServiceError::InvalidScore(e.to_string()))
}

async fn rate(
    State(app): Shared,
    body: Result<Json<RatingRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let score = parse_score(&req.score)?;
    app.store
        .record_rating(&req.session_id, &req.clip_id, score, req.client_ts)?;
    Ok(Json(serde_json::json!({ "ok": true })))
}

fn presented_token(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
}

async fn report(State(app): Shared, headers: HeaderMap) -> Result<Response, ServiceError> {
    let expected = app.admin_token.as_deref().ok_or(ServiceError::ReportDisabled)?;
    if presented_token(&headers) != Some(expected) {
        return Err(ServiceError::Unauthorized);
    }
    let csv = mos_csv(&app.store.snapshot().report()?);
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}
