//! Fixture sessions: drive the monitor over recorded revisions on a logical
//! clock and produce the ranking a moderator would see at the end.

use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use talkwatch::ingest::{FixtureTransport, IngestError, PageConfig, DEFAULT_POLL_INTERVAL};
use talkwatch::pipeline::{Monitor, TickSummary};
use talkwatch::ranking::{build_ranking, RankingPage};
use talkwatch::store::StoreError;
use talkwatch::{Config, Store, StoreState};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session input: {0}")]
    Input(String),
    #[error(transparent)]
    Fixture(#[from] IngestError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("conversations left unscored: {}", .0.join(", "))]
    Incomplete(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub ranking: RankingPage,
    pub state: Arc<StoreState>,
    pub ticks: Vec<TickSummary>,
    /// Ingest and scorer errors reported along the way.
    pub errors: Vec<String>,
}

/// Replay every revision under `roots` through a monitor writing to `store`.
///
/// Each tick fetches the next revision of every page, with the clock set to
/// the latest revision time fetched in that tick. The ranking is taken at
/// the final clock value, or at the epoch when there was nothing to read.
pub fn run_fixture_session<P: AsRef<Path>>(
    roots: &[P],
    config: &Config,
    store: Arc<Store>,
) -> Result<SessionOutcome, SessionError> {
    let ranking_config = config.ranking_config().map_err(|e| SessionError::Input(e.to_string()))?;
    let scorer = config
        .scorer_descriptor()
        .and_then(|d| d.instantiate())
        .map_err(|e| SessionError::Input(e.to_string()))?;
    let source = FixtureTransport::open_all(roots)?;
    let pages = source
        .page_titles()
        .into_iter()
        .map(|t| PageConfig::new(t, DEFAULT_POLL_INTERVAL, true))
        .collect::<Result<Vec<_>, _>>()?;

    let mut monitor = Monitor::new(source, pages, scorer, store.clone());
    let mut now = DateTime::<Utc>::UNIX_EPOCH;
    let mut ticks = Vec::new();
    let mut errors = Vec::new();
    while monitor.source().has_pending() {
        let titles = monitor.source().page_titles();
        if let Some(t) = titles.iter().filter_map(|p| monitor.source().next_revision_time(p)).max() {
            now = now.max(t);
        }
        monitor.poller_mut().mark_all_due();
        let summary = monitor.tick(now)?;
        errors.extend(summary.ingest_errors.iter().cloned());
        errors.extend(summary.scorer_errors.iter().cloned());
        ticks.push(summary);
    }

    let state = store.snapshot();
    let unscored: Vec<String> = state
        .conversations
        .values()
        .filter(|c| state.history(&c.conversation_id).map_or(0, |h| h.len()) < c.comment_count())
        .map(|c| c.conversation_id.clone())
        .collect();
    if !unscored.is_empty() {
        return Err(SessionError::Incomplete(unscored));
    }
    let entries = build_ranking(state.scored_conversations(), now, &ranking_config);
    Ok(SessionOutcome { ranking: RankingPage { generated_at: now, entries }, state, ticks, errors })
}
