//! Tick-driven monitor: poll, parse, persist new comments, score, alert.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use tracing::{error, info, warn};

use crate::forecast::{missing_points, ForecastHistory, Scorer};
use crate::ingest::{IngestError, PageConfig, PageDelta, Poller, RevisionSource};
use crate::parser::{detect_new_comments, parse_talk_page, vanished_conversations, ConversationRecord};
use crate::ranking::evaluate_watches;
use crate::store::{EventPayload, Store, StoreError};

/// Counters for one tick.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct TickSummary {
    pub deltas: usize,
    pub new_comments: usize,
    pub conversations_updated: usize,
    pub points_appended: usize,
    pub alerts_emitted: usize,
    pub ingest_errors: Vec<String>,
    pub scorer_errors: Vec<String>,
}

pub struct Monitor<S> {
    source: S,
    poller: Poller,
    scorer: Arc<dyn Scorer>,
    store: Arc<Store>,
    /// Text of the last acknowledged revision per page.
    page_texts: HashMap<String, (u64, String)>,
}

impl<S: RevisionSource> Monitor<S> {
    /// Pages already recorded in the store resume after their last
    /// processed revision.
    pub fn new(mut source: S, pages: Vec<PageConfig>, scorer: Arc<dyn Scorer>, store: Arc<Store>) -> Self {
        let state = store.snapshot();
        for page in &pages {
            if let Some(progress) = state.pages.get(&page.page_title) {
                source.resume_after(&page.page_title, progress.revision_id);
            }
        }
        Monitor { source, poller: Poller::new(pages), scorer, store, page_texts: HashMap::new() }
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    pub fn poller(&self) -> &Poller {
        &self.poller
    }

    pub fn poller_mut(&mut self) -> &mut Poller {
        &mut self.poller
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn scorer_id(&self) -> &str {
        self.scorer.scorer_id()
    }

    /// One polling round followed by scoring. Only store failures abort;
    /// everything else is reported in the summary.
    pub fn tick(&mut self, now: DateTime<Utc>) -> Result<TickSummary, StoreError> {
        let mut summary = TickSummary::default();
        let report = self.poller.poll_tick(&mut self.source, now);
        for (page, err) in &report.errors {
            summary.ingest_errors.push(format!("{page}: {err}"));
        }
        summary.deltas = report.deltas.len();
        for delta in report.deltas {
            if let Err(err) = self.ingest_delta(&delta, now, &mut summary) {
                match err {
                    IngestOutcome::Store(e) if e.is_fatal() => return Err(e),
                    IngestOutcome::Store(e) => {
                        error!(page = %delta.page_title, "batch rejected by store: {e}");
                        summary.ingest_errors.push(format!("{}: {e}", delta.page_title));
                    }
                    IngestOutcome::Ingest(e) => {
                        warn!(page = %delta.page_title, "delta skipped: {e}");
                        summary.ingest_errors.push(format!("{}: {e}", delta.page_title));
                    }
                }
            }
        }
        self.score_pending(now, &mut summary)?;
        Ok(summary)
    }

    fn ingest_delta(&mut self, delta: &PageDelta, now: DateTime<Utc>, summary: &mut TickSummary) -> Result<(), IngestOutcome> {
        let page = delta.page_title.as_str();
        let old_text = match self.page_texts.get(page) {
            Some((rev, text)) if *rev == delta.old_revision_id => text.as_str(),
            _ if delta.old_revision_id == 0 => "",
            _ => {
                return Err(IngestOutcome::Ingest(IngestError::DeltaMismatch(format!(
                    "no text for base revision {} of {page}",
                    delta.old_revision_id
                ))))
            }
        };
        let new_text = delta.apply(old_text).map_err(IngestOutcome::Ingest)?;
        let parsed = parse_talk_page(&new_text, page);
        let state = self.store.snapshot();
        let previous: Vec<ConversationRecord> = state.conversations_of_page(page).cloned().collect();
        let live_previous: Vec<ConversationRecord> = previous.iter().filter(|c| c.is_live).cloned().collect();

        let mut batch = Vec::new();
        for conv in &parsed.conversations {
            let Some(stored) = state.conversation(&conv.conversation_id) else { continue };
            let n = stored.comment_count();
            if conv.comment_count() < n {
                warn!(conversation = %conv.conversation_id, "comments removed upstream; keeping stored record");
                continue;
            }
            let mut prefix = conv.clone();
            prefix.comments.truncate(n);
            prefix.last_activity = prefix.comments.iter().filter_map(|c| c.posted_at).max();
            if prefix != *stored {
                batch.push(EventPayload::ConversationUpdated(prefix));
                summary.conversations_updated += 1;
            }
        }
        let headings: HashMap<&str, &ConversationRecord> =
            parsed.conversations.iter().map(|c| (c.conversation_id.as_str(), c)).collect();
        for event in detect_new_comments(&previous, &parsed.conversations, delta.new_revision_id) {
            let conv = headings[event.conversation_id.as_str()];
            batch.push(EventPayload::NewComment {
                page_title: conv.page_title.clone(),
                heading: conv.heading.clone(),
                event,
            });
            summary.new_comments += 1;
        }
        for id in vanished_conversations(&live_previous, &parsed.conversations) {
            let mut gone = state.conversation(&id).expect("listed from state").clone();
            gone.is_live = false;
            info!(conversation = %id, "conversation no longer on page");
            batch.push(EventPayload::ConversationUpdated(gone));
            summary.conversations_updated += 1;
        }
        let newer = state.pages.get(page).is_none_or(|p| p.revision_id < delta.new_revision_id);
        if newer {
            batch.push(EventPayload::RevisionProcessed {
                page_title: page.to_string(),
                revision_id: delta.new_revision_id,
                revision_time: delta.new_revision_time,
            });
        }
        self.store.append_batch(batch, now).map_err(IngestOutcome::Store)?;
        self.poller
            .acknowledge(page, delta.new_revision_id)
            .map_err(IngestOutcome::Ingest)?;
        self.page_texts.insert(page.to_string(), (delta.new_revision_id, new_text));
        Ok(())
    }

    /// Bring every history up to its conversation's comment count. A
    /// conversation whose scorer call fails is left for the next tick.
    fn score_pending(&mut self, now: DateTime<Utc>, summary: &mut TickSummary) -> Result<(), StoreError> {
        let state = self.store.snapshot();
        let mut emitted: HashSet<String> = state.alert_ids().clone();
        for (id, conv) in &state.conversations {
            let empty;
            let history = match state.history(id) {
                Some(h) => h,
                None => {
                    empty = ForecastHistory::new(id.clone());
                    &empty
                }
            };
            if history.len() >= conv.comment_count() {
                continue;
            }
            let points = match missing_points(history, conv, conv.comment_count() as u32, self.scorer.as_ref(), now) {
                Ok(points) => points,
                Err(e) => {
                    warn!(conversation = %id, "scoring deferred: {e}");
                    summary.scorer_errors.push(format!("{id}: {e}"));
                    continue;
                }
            };
            let n_points = points.len();
            let mut batch = Vec::new();
            let mut alerts = 0;
            for point in points {
                let fired = evaluate_watches(state.watches.values(), &point, &emitted, now);
                batch.push(EventPayload::ForecastPoint(point));
                for alert in fired {
                    emitted.insert(alert.alert_id.clone());
                    batch.push(EventPayload::AlertEmitted(alert));
                    alerts += 1;
                }
            }
            match self.store.append_batch(batch, now) {
                Ok(_) => {
                    summary.points_appended += n_points;
                    summary.alerts_emitted += alerts;
                }
                Err(e) if e.is_fatal() => return Err(e),
                Err(e) => {
                    error!(conversation = %id, "forecast batch rejected: {e}");
                    summary.scorer_errors.push(format!("{id}: {e}"));
                }
            }
        }
        Ok(())
    }
}

enum IngestOutcome {
    Store(StoreError),
    Ingest(IngestError),
}
