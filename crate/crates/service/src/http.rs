//! JSON API over a [`ReviewStore`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tabsync_core::update::{EditProposal, Rule};
use tower_http::services::ServeDir;

use crate::record::{Citation, Decision, RecordFilter, Status};
use crate::store::ReviewStore;
use crate::ServiceError;

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 500;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let code = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::AlreadyDecided(_) | ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::MissingCitation(_) | ServiceError::Invalid { .. } | ServiceError::MissingUrl => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Journal { .. } | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (code, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

fn bad_request(msg: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": msg }))).into_response()
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct ListQuery {
    status: Option<String>,
    direction: Option<String>,
    rule: Option<String>,
    entity: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

impl ListQuery {
    fn filter(&self) -> Result<RecordFilter, String> {
        let filter = RecordFilter {
            status: self.status.as_deref().map(str::parse::<Status>).transpose()?,
            direction: self.direction.clone(),
            rule: self.rule.as_deref().map(str::parse::<Rule>).transpose()?,
            entity: self.entity.clone(),
        };
        filter.validate()?;
        Ok(filter)
    }
}

#[derive(Debug, Deserialize)]
pub struct DecisionBody {
    pub decision: Decision,
    #[serde(default)]
    pub citation: Option<Citation>,
    #[serde(default)]
    pub reviewer: String,
}

type Shared = State<Arc<ReviewStore>>;

async fn list(State(store): Shared, Query(q): Query<ListQuery>) -> Response {
    match q.filter() {
        Ok(f) => Json(store.list(&f, q.offset.unwrap_or(0), q.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE))).into_response(),
        Err(e) => bad_request(e),
    }
}

async fn enqueue(State(store): Shared, Json(proposals): Json<Vec<EditProposal>>) -> Result<Response, ServiceError> {
    let ids = store.enqueue(&proposals)?;
    Ok((StatusCode::CREATED, Json(json!({ "ids": ids }))).into_response())
}

async fn fetch(State(store): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    store.get(&id).map(|r| Json(r).into_response()).ok_or(ServiceError::NotFound(id))
}

async fn decide(State(store): Shared, Path(id): Path<String>, Json(body): Json<DecisionBody>) -> Result<Response, ServiceError> {
    let record = store.decide(&id, body.decision, body.citation, &body.reviewer)?;
    Ok(Json(record).into_response())
}

async fn stats(State(store): Shared, Query(q): Query<ListQuery>) -> Response {
    match q.filter() {
        Ok(f) => Json(store.stats(&f)).into_response(),
        Err(e) => bad_request(e),
    }
}

async fn export(State(store): Shared, body: Bytes) -> Result<Response, ServiceError> {
    let filter = if body.iter().all(u8::is_ascii_whitespace) {
        RecordFilter::default()
    } else {
        match serde_json::from_slice::<RecordFilter>(&body) {
            Ok(f) => f,
            Err(e) => return Ok(bad_request(e.to_string())),
        }
    };
    if let Err(e) = filter.validate() {
        return Ok(bad_request(e));
    }
    let proposals = store.export_accepted(&filter, |_| Ok(()))?;
    Ok(Json(proposals).into_response())
}

/// Routes of the review API; `ui_dir`, when given, is served under `/ui`.
pub fn router(store: Arc<ReviewStore>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/proposals", get(list).post(enqueue))
        .route("/proposals/{id}", get(fetch))
        .route("/proposals/{id}/decision", post(decide))
        .route("/stats", get(stats))
        .route("/export", post(export))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(store: Arc<ReviewStore>, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "review service listening");
    axum::serve(listener, router(store, ui_dir)).await
}
