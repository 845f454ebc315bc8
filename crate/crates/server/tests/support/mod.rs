//! Shared by the conformance tests and the acceptance harness: a store
//! built from the bundled fixtures, a live server on an ephemeral port and
//! replay of recorded request/response exchanges.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use talkwatch::ingest::{FixtureTransport, PageConfig, DEFAULT_POLL_INTERVAL};
use talkwatch::pipeline::Monitor;
use talkwatch::ranking::{RankingConfig, WatchItem};
use talkwatch::store::EventPayload;
use talkwatch::{Store, StoreState};
use talkwatch_server::{router, ApiState, MonitorStatus};

pub const ALICE: &str = "alice-token";
pub const BOB: &str = "bob-token";

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../replay/fixtures")
}

pub fn recorded_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../server/tests/recorded/api.json")
}

/// Clock the server runs on in the recordings.
pub fn frozen_now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 3, 14, 11, 0, 0).unwrap()
}

/// Run the escalation and pleasant fixtures through a monitor. After the
/// first revision alice watches the escalating thread at 0.3.
pub fn fixture_store(store: Arc<Store>) -> (Arc<StoreState>, MonitorStatus) {
    let dir = fixtures_dir();
    let source = FixtureTransport::open_all(&[dir.join("escalation"), dir.join("pleasant")]).unwrap();
    let pages = source
        .page_titles()
        .into_iter()
        .map(|t| PageConfig::new(t, DEFAULT_POLL_INTERVAL, true).unwrap())
        .collect();
    let scorer = Arc::new(talkwatch::forecast::BaselineScorer::bundled());
    let mut monitor = Monitor::new(source, pages, scorer, store.clone());
    let mut now = DateTime::<Utc>::UNIX_EPOCH;
    let mut first = true;
    while monitor.source().has_pending() {
        for title in monitor.source().page_titles() {
            if let Some(t) = monitor.source().next_revision_time(&title) {
                now = now.max(t);
            }
        }
        monitor.poller_mut().mark_all_due();
        let summary = monitor.tick(now).unwrap();
        assert!(summary.ingest_errors.is_empty() && summary.scorer_errors.is_empty());
        if first {
            first = false;
            let state = store.snapshot();
            let target = state.conversations.values().find(|c| c.heading == "Infobox photo").unwrap();
            let watch = WatchItem::new("alice", &target.conversation_id, 0.3, now).unwrap();
            store.append(EventPayload::WatchCreated(watch), now).unwrap();
        }
    }
    let status = MonitorStatus { pages: monitor.poller().status(), last_tick: Some(now), last_tick_errors: Vec::new() };
    (store.snapshot(), status)
}

pub fn api_state(store: Arc<Store>, status: MonitorStatus) -> ApiState {
    let tokens = [(ALICE.to_string(), "alice".to_string()), (BOB.to_string(), "bob".to_string())];
    let state = ApiState::new(store, tokens, RankingConfig::default(), "baseline-v1:lex1-6a210f55")
        .with_clock(Arc::new(frozen_now));
    *state.status_handle().write().unwrap() = status;
    state
}

pub struct LiveServer {
    pub base: String,
    runtime: tokio::runtime::Runtime,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
}

impl LiveServer {
    pub fn start(state: ApiState) -> LiveServer {
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        runtime.spawn(async move {
            axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
        });
        LiveServer { base, runtime, shutdown: Some(tx) }
    }

    pub fn call(&self, req: &RecordedRequest) -> RecordedResponse {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        let url = format!("{}{}", self.base, req.path);
        let auth = req.token.as_ref().map(|t| format!("Bearer {t}"));
        let result = match req.method.as_str() {
            "GET" | "DELETE" => {
                let mut r = if req.method == "GET" { agent.get(&url) } else { agent.delete(&url) };
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                r.call()
            }
            "POST" => {
                let mut r = agent.post(&url).header("Content-Type", "application/json");
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                let body = match &req.body {
                    Some(serde_json::Value::String(raw)) => raw.clone(),
                    Some(v) => v.to_string(),
                    None => String::new(),
                };
                r.send(body)
            }
            m => panic!("unsupported method {m}"),
        };
        let mut resp = result.unwrap();
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        let body = if text.is_empty() { None } else { Some(serde_json::from_str(&text).unwrap()) };
        RecordedResponse { status, body }
    }
}

impl Drop for LiveServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedRequest {
    pub method: String,
    pub path: String,
    pub token: Option<String>,
    /// JSON body; a string is sent verbatim so malformed bodies can be recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedResponse {
    pub status: u16,
    pub body: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exchange {
    pub name: String,
    pub endpoint: String,
    pub request: RecordedRequest,
    pub response: Option<RecordedResponse>,
}

pub fn load_exchanges() -> Vec<Exchange> {
    serde_json::from_str(&std::fs::read_to_string(recorded_path()).unwrap()).unwrap()
}

/// Replay the recorded exchanges in order against a fresh fixture server and
/// return a description of every mismatch. With `RECORD_API=1` the observed
/// responses are written back instead.
pub fn check_recordings() -> Vec<String> {
    let store = Arc::new(Store::in_memory());
    let (_, status) = fixture_store(store.clone());
    let server = LiveServer::start(api_state(store, status));
    let mut exchanges = load_exchanges();
    let mut problems = Vec::new();
    for ex in &mut exchanges {
        let got = server.call(&ex.request);
        if std::env::var_os("RECORD_API").is_some() {
            ex.response = Some(got);
        } else if ex.response.as_ref() != Some(&got) {
            problems.push(format!("{}: expected {:?}, got {:?}", ex.name, ex.response, got));
        }
    }
    if std::env::var_os("RECORD_API").is_some() {
        std::fs::write(recorded_path(), serde_json::to_string_pretty(&exchanges).unwrap() + "\n").unwrap();
    }
    problems
}
