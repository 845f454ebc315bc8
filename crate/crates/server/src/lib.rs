//! HTTP API for moderators. Every route sits under `/api` and requires a
//! bearer token from the configuration; the token's principal is the
//! moderator id used for watches and alerts.
//!
//! Reads are answered from one store snapshot per request. Writes go through
//! the store's single writer on a blocking thread.

pub mod monitor;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get};
use axum::{Extension, Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use talkwatch::ingest::PageStatus;
use talkwatch::ranking::{build_ranking, AlertEvent, RankingConfig, RankingPage, WatchItem};
use talkwatch::store::{EventPayload, StoreError};
use talkwatch::{CommentRecord, ForecastPoint, Store};

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// What the monitor thread last reported, for `/api/health`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MonitorStatus {
    pub pages: Vec<PageStatus>,
    pub last_tick: Option<DateTime<Utc>>,
    pub last_tick_errors: Vec<String>,
}

#[derive(Clone)]
pub struct ApiState {
    store: Arc<Store>,
    /// token -> principal
    tokens: Arc<HashMap<String, String>>,
    ranking: RankingConfig,
    scorer_id: String,
    status: Arc<RwLock<MonitorStatus>>,
    clock: Clock,
}

impl ApiState {
    pub fn new(
        store: Arc<Store>,
        tokens: impl IntoIterator<Item = (String, String)>,
        ranking: RankingConfig,
        scorer_id: impl Into<String>,
    ) -> Self {
        ApiState {
            store,
            tokens: Arc::new(tokens.into_iter().collect()),
            ranking,
            scorer_id: scorer_id.into(),
            status: Arc::default(),
            clock: Arc::new(Utc::now),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    /// Shared slot the monitor thread writes its status into.
    pub fn status_handle(&self) -> Arc<RwLock<MonitorStatus>> {
        self.status.clone()
    }

    fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }
}

#[derive(Debug, Clone)]
struct Principal(String);

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} not found"))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Rejected(m) => ApiError::new(StatusCode::CONFLICT, m),
            e => {
                tracing::error!("store write failed: {e}");
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "store unavailable")
            }
        }
    }
}

pub fn router(state: ApiState) -> Router {
    let api = Router::new()
        .route("/ranking", get(ranking))
        .route("/conversations/{id}", get(conversation))
        .route("/conversations/{id}/history", get(history))
        .route("/watches", get(list_watches).post(create_watch))
        .route("/watches/{id}", delete(delete_watch))
        .route("/alerts", get(alerts))
        .route("/health", get(health))
        .fallback(|| async { ApiError::not_found("route") });
    Router::new()
        .nest("/api", api)
        .fallback(|| async { ApiError::not_found("route") })
        .layer(middleware::from_fn_with_state(state.clone(), authenticate))
        .with_state(state)
}

async fn authenticate(State(state): State<ApiState>, mut req: Request, next: Next) -> Response {
    let principal = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .and_then(|token| state.tokens.get(token.trim()))
        .cloned();
    match principal {
        Some(p) => {
            req.extensions_mut().insert(Principal(p));
            next.run(req).await
        }
        None => {
            let mut resp = ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized").into_response();
            resp.headers_mut().insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
            resp
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    limit: Option<usize>,
    offset: Option<usize>,
}

async fn ranking(
    State(state): State<ApiState>,
    query: Result<Query<PageQuery>, QueryRejection>,
) -> Result<Json<RankingPage>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let limit = q.limit.unwrap_or(DEFAULT_PAGE_SIZE);
    if limit == 0 || limit > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!("limit must be in 1..={MAX_PAGE_SIZE}")));
    }
    let now = state.now();
    let snapshot = state.store.snapshot();
    let entries = build_ranking(snapshot.scored_conversations(), now, &state.ranking)
        .into_iter()
        .skip(q.offset.unwrap_or(0))
        .take(limit)
        .collect();
    Ok(Json(RankingPage { generated_at: now, entries }))
}

#[derive(Debug, Serialize)]
struct ScoredComment<'a> {
    #[serde(flatten)]
    comment: &'a CommentRecord,
    /// Forecast made once this comment was posted.
    forecast: Option<&'a ForecastPoint>,
}

async fn conversation(State(state): State<ApiState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snapshot = state.store.snapshot();
    let conv = snapshot.conversation(&id).ok_or_else(|| ApiError::not_found("conversation"))?;
    let history = snapshot.history(&id);
    let comments: Vec<ScoredComment> = conv
        .comments
        .iter()
        .map(|c| ScoredComment { comment: c, forecast: history.and_then(|h| h.at(c.ordinal)) })
        .collect();
    let body = json!({
        "conversation_id": conv.conversation_id,
        "page_title": conv.page_title,
        "heading": conv.heading,
        "last_activity": conv.last_activity,
        "is_live": conv.is_live,
        "comment_count": conv.comment_count(),
        "latest_score": history.and_then(|h| h.latest()).map(|p| p.score),
        "comments": comments,
    });
    Ok(Json(body).into_response())
}

async fn history(State(state): State<ApiState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snapshot = state.store.snapshot();
    snapshot.conversation(&id).ok_or_else(|| ApiError::not_found("conversation"))?;
    let body = match snapshot.history(&id) {
        Some(h) => serde_json::to_value(h).expect("history serializes"),
        None => json!({ "conversation_id": id, "points": [] }),
    };
    Ok(Json(body).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchRequest {
    conversation_id: String,
    alert_threshold: f64,
}

async fn create_watch(
    State(state): State<ApiState>,
    Extension(Principal(moderator)): Extension<Principal>,
    body: Result<Json<WatchRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<WatchItem>), ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let now = state.now();
    let snapshot = state.store.snapshot();
    snapshot.conversation(&req.conversation_id).ok_or_else(|| ApiError::not_found("conversation"))?;
    if snapshot.watch_for(&moderator, &req.conversation_id).is_some() {
        return Err(ApiError::new(StatusCode::CONFLICT, "already watching this conversation"));
    }
    let watch = WatchItem::new(&moderator, &req.conversation_id, req.alert_threshold, now)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let store = state.store.clone();
    let payload = EventPayload::WatchCreated(watch.clone());
    blocking(move || store.append(payload, now)).await?;
    Ok((StatusCode::CREATED, Json(watch)))
}

async fn delete_watch(
    State(state): State<ApiState>,
    Extension(Principal(moderator)): Extension<Principal>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    let snapshot = state.store.snapshot();
    // another moderator's watch looks the same as a missing one
    match snapshot.watches.get(&id) {
        Some(w) if w.moderator_id == moderator => {}
        _ => return Err(ApiError::not_found("watch")),
    }
    let store = state.store.clone();
    let now = state.now();
    blocking(move || store.append(EventPayload::WatchDeleted { watch_id: id }, now)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_watches(
    State(state): State<ApiState>,
    Extension(Principal(moderator)): Extension<Principal>,
) -> Json<serde_json::Value> {
    let snapshot = state.store.snapshot();
    let watches: Vec<&WatchItem> = snapshot.watches.values().filter(|w| w.moderator_id == moderator).collect();
    Json(json!({ "watches": watches }))
}

#[derive(Debug, Deserialize)]
pub struct AlertQuery {
    since: Option<usize>,
}

/// Alerts on the caller's watches emitted at or after position `since` of
/// the alert log. `next_cursor` is the position to poll from next.
async fn alerts(
    State(state): State<ApiState>,
    Extension(Principal(moderator)): Extension<Principal>,
    query: Result<Query<AlertQuery>, QueryRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let snapshot = state.store.snapshot();
    let since = q.since.unwrap_or(0);
    if since > snapshot.alerts.len() {
        return Err(ApiError::bad_request(format!("cursor {since} is ahead of the alert log")));
    }
    let mine: Vec<&AlertEvent> = snapshot.alerts[since..]
        .iter()
        .filter(|a| snapshot.watches.get(&a.watch_id).is_some_and(|w| w.moderator_id == moderator))
        .collect();
    Ok(Json(json!({ "alerts": mine, "next_cursor": snapshot.alerts.len() })))
}

async fn health(State(state): State<ApiState>) -> Json<serde_json::Value> {
    let status = state.status.read().map(|s| s.clone()).unwrap_or_default();
    let snapshot = state.store.snapshot();
    let last_poll: serde_json::Map<String, serde_json::Value> = status
        .pages
        .iter()
        .map(|p| (p.page_title.clone(), json!(p.last_poll)))
        .collect();
    Json(json!({
        "status": if state.store.is_halted() { "degraded" } else { "ok" },
        "build": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "scorer_id": state.scorer_id,
        "pages_tracked": status.pages.iter().filter(|p| p.enabled).count(),
        "last_poll": last_poll,
        "pages": status.pages,
        "last_tick": status.last_tick,
        "last_sequence_no": snapshot.last_sequence_no,
    }))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StoreError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}
