use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::forecast::{ForecastHistory, ForecastPoint};
use crate::parser::{ConversationRecord, NewCommentEvent};
use crate::ranking::{AlertEvent, WatchItem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum EventPayload {
    NewComment {
        event: NewCommentEvent,
        page_title: String,
        heading: String,
    },
    ForecastPoint(ForecastPoint),
    WatchCreated(WatchItem),
    WatchDeleted {
        watch_id: String,
    },
    AlertEmitted(AlertEvent),
    /// Replaces a stored conversation without adding comments: edited
    /// comment text, or the conversation going not-live.
    ConversationUpdated(ConversationRecord),
    /// Marks a page revision as fully ingested.
    RevisionProcessed {
        page_title: String,
        revision_id: u64,
        revision_time: DateTime<Utc>,
    },
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::NewComment { .. } => "new-comment",
            EventPayload::ForecastPoint(_) => "forecast-point",
            EventPayload::WatchCreated(_) => "watch-created",
            EventPayload::WatchDeleted { .. } => "watch-deleted",
            EventPayload::AlertEmitted(_) => "alert-emitted",
            EventPayload::ConversationUpdated(_) => "conversation-updated",
            EventPayload::RevisionProcessed { .. } => "revision-processed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogEntry {
    pub sequence_no: u64,
    pub applied_at: DateTime<Utc>,
    /// Entries of the same batch written after this one. A log ending on a
    /// nonzero value was cut off mid-batch.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub batch_rest: u32,
    #[serde(flatten)]
    pub payload: EventPayload,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageProgress {
    pub revision_id: u64,
    pub revision_time: DateTime<Utc>,
}

/// Everything the store knows, as of `last_sequence_no`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "StateFile")]
pub struct StoreState {
    pub last_sequence_no: u64,
    pub conversations: BTreeMap<String, Arc<ConversationRecord>>,
    pub histories: BTreeMap<String, Arc<ForecastHistory>>,
    pub watches: BTreeMap<String, WatchItem>,
    /// Emission order; API cursors index into this list.
    pub alerts: Vec<AlertEvent>,
    pub pages: BTreeMap<String, PageProgress>,
    #[serde(skip)]
    alert_ids: HashSet<String>,
}

#[derive(Deserialize)]
struct StateFile {
    last_sequence_no: u64,
    conversations: BTreeMap<String, Arc<ConversationRecord>>,
    histories: BTreeMap<String, Arc<ForecastHistory>>,
    watches: BTreeMap<String, WatchItem>,
    alerts: Vec<AlertEvent>,
    pages: BTreeMap<String, PageProgress>,
}

impl From<StateFile> for StoreState {
    fn from(f: StateFile) -> Self {
        let alert_ids = f.alerts.iter().map(|a| a.alert_id.clone()).collect();
        StoreState {
            last_sequence_no: f.last_sequence_no,
            conversations: f.conversations,
            histories: f.histories,
            watches: f.watches,
            alerts: f.alerts,
            pages: f.pages,
            alert_ids,
        }
    }
}

impl StoreState {
    pub fn alert_ids(&self) -> &HashSet<String> {
        &self.alert_ids
    }

    pub fn conversation(&self, id: &str) -> Option<&ConversationRecord> {
        self.conversations.get(id).map(Arc::as_ref)
    }

    pub fn history(&self, id: &str) -> Option<&ForecastHistory> {
        self.histories.get(id).map(Arc::as_ref)
    }

    pub fn conversations_of_page<'a>(&'a self, page_title: &'a str) -> impl Iterator<Item = &'a ConversationRecord> + 'a {
        self.conversations
            .values()
            .map(Arc::as_ref)
            .filter(move |c| c.page_title == page_title)
    }

    pub fn watch_for(&self, moderator_id: &str, conversation_id: &str) -> Option<&WatchItem> {
        self.watches
            .values()
            .find(|w| w.moderator_id == moderator_id && w.conversation_id == conversation_id)
    }

    /// Conversations paired with their histories, for ranking.
    pub fn scored_conversations(&self) -> impl Iterator<Item = (&ConversationRecord, &ForecastHistory)> {
        self.conversations
            .iter()
            .filter_map(|(id, c)| self.histories.get(id).map(|h| (c.as_ref(), h.as_ref())))
    }

    /// Checks that `payload` may be applied to this state.
    pub fn validate(&self, payload: &EventPayload) -> Result<(), String> {
        match payload {
            EventPayload::NewComment { event, page_title, heading } => {
                let comment = &event.comment;
                if event.conversation_id.is_empty() || comment.comment_id.is_empty() {
                    return Err("new-comment with empty id".into());
                }
                let existing = self.conversation(&event.conversation_id);
                let count = existing.map_or(0, |c| c.comment_count());
                if comment.ordinal as usize != count + 1 {
                    return Err(format!(
                        "comment ordinal {} does not follow {count} stored comments of {}",
                        comment.ordinal, event.conversation_id
                    ));
                }
                match existing {
                    Some(c) if c.page_title != *page_title => {
                        return Err(format!("conversation {} belongs to {}", c.conversation_id, c.page_title));
                    }
                    None if page_title.is_empty() || heading.is_empty() => {
                        return Err("new conversation without page title or heading".into());
                    }
                    _ => {}
                }
                if let Some(pid) = &comment.parent_comment_id {
                    let parent = existing
                        .and_then(|c| c.comments.iter().find(|p| &p.comment_id == pid))
                        .ok_or_else(|| format!("parent {pid} is not a stored comment"))?;
                    if parent.indent_depth >= comment.indent_depth {
                        return Err(format!("parent {pid} is not shallower than its reply"));
                    }
                }
                Ok(())
            }
            EventPayload::ForecastPoint(point) => {
                let conv = self
                    .conversation(&point.conversation_id)
                    .ok_or_else(|| format!("forecast for unknown conversation {}", point.conversation_id))?;
                if point.after_ordinal as usize > conv.comment_count() {
                    return Err(format!(
                        "forecast after comment {} of a {}-comment conversation",
                        point.after_ordinal,
                        conv.comment_count()
                    ));
                }
                match self.history(&point.conversation_id) {
                    Some(h) => h.check_next(point),
                    None => ForecastHistory::new(&point.conversation_id).check_next(point),
                }
                .map_err(|e| e.to_string())
            }
            EventPayload::WatchCreated(watch) => {
                watch.validate().map_err(|e| e.to_string())?;
                if self.conversation(&watch.conversation_id).is_none() {
                    return Err(format!("watch on unknown conversation {}", watch.conversation_id));
                }
                if self.watches.contains_key(&watch.watch_id) {
                    return Err(format!("watch {} already exists", watch.watch_id));
                }
                if self.watch_for(&watch.moderator_id, &watch.conversation_id).is_some() {
                    return Err("moderator already watches this conversation".into());
                }
                Ok(())
            }
            EventPayload::WatchDeleted { watch_id } => {
                if !self.watches.contains_key(watch_id) {
                    return Err(format!("unknown watch {watch_id}"));
                }
                Ok(())
            }
            EventPayload::AlertEmitted(alert) => {
                if alert.alert_id != AlertEvent::id_for(&alert.watch_id, alert.triggering_after_ordinal) {
                    return Err("alert_id does not match (watch_id, ordinal)".into());
                }
                if self.alert_ids.contains(&alert.alert_id) {
                    return Err(format!("alert {} already emitted", alert.alert_id));
                }
                if !(0.0..=1.0).contains(&alert.score_at_trigger) {
                    return Err("alert score outside [0, 1]".into());
                }
                Ok(())
            }
            EventPayload::ConversationUpdated(record) => {
                let stored = self
                    .conversation(&record.conversation_id)
                    .ok_or_else(|| format!("update of unknown conversation {}", record.conversation_id))?;
                if stored.comment_count() != record.comment_count() {
                    return Err("conversation update may not change the comment count".into());
                }
                if stored.page_title != record.page_title {
                    return Err("conversation update may not move pages".into());
                }
                record.validate()
            }
            EventPayload::RevisionProcessed { page_title, revision_id, .. } => {
                if let Some(p) = self.pages.get(page_title) {
                    if *revision_id <= p.revision_id {
                        return Err(format!(
                            "revision {revision_id} of {page_title} is not newer than {}",
                            p.revision_id
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Apply a validated payload.
    pub fn apply(&mut self, sequence_no: u64, payload: &EventPayload) {
        debug_assert!(sequence_no > self.last_sequence_no);
        match payload {
            EventPayload::NewComment { event, page_title, heading } => {
                let entry = self.conversations.entry(event.conversation_id.clone()).or_insert_with(|| {
                    Arc::new(ConversationRecord {
                        conversation_id: event.conversation_id.clone(),
                        page_title: page_title.clone(),
                        heading: heading.clone(),
                        comments: Vec::new(),
                        last_activity: None,
                        is_live: true,
                    })
                });
                let next = entry.with_appended([&event.comment]);
                *entry = Arc::new(next);
            }
            EventPayload::ForecastPoint(point) => {
                let history = self
                    .histories
                    .entry(point.conversation_id.clone())
                    .or_insert_with(|| Arc::new(ForecastHistory::new(&point.conversation_id)));
                Arc::make_mut(history)
                    .append(point.clone())
                    .expect("validated forecast point");
            }
            EventPayload::WatchCreated(watch) => {
                self.watches.insert(watch.watch_id.clone(), watch.clone());
            }
            EventPayload::WatchDeleted { watch_id } => {
                self.watches.remove(watch_id);
            }
            EventPayload::AlertEmitted(alert) => {
                self.alert_ids.insert(alert.alert_id.clone());
                self.alerts.push(alert.clone());
            }
            EventPayload::ConversationUpdated(record) => {
                self.conversations.insert(record.conversation_id.clone(), Arc::new(record.clone()));
            }
            EventPayload::RevisionProcessed { page_title, revision_id, revision_time } => {
                self.pages.insert(
                    page_title.clone(),
                    PageProgress { revision_id: *revision_id, revision_time: *revision_time },
                );
            }
        }
        self.last_sequence_no = sequence_no;
    }

    /// Validate then apply; nothing changes on error.
    pub fn try_apply(&mut self, sequence_no: u64, payload: &EventPayload) -> Result<(), String> {
        if sequence_no <= self.last_sequence_no {
            return Err(format!("sequence_no {sequence_no} not after {}", self.last_sequence_no));
        }
        self.validate(payload)?;
        self.apply(sequence_no, payload);
        Ok(())
    }

    /// A minimal event sequence that rebuilds this state. Sequence numbers
    /// end at `last_sequence_no`.
    pub fn export(&self, applied_at: DateTime<Utc>) -> Vec<EventLogEntry> {
        let mut payloads = Vec::new();
        for conv in self.conversations.values() {
            for comment in &conv.comments {
                payloads.push(EventPayload::NewComment {
                    event: NewCommentEvent {
                        conversation_id: conv.conversation_id.clone(),
                        comment: comment.clone(),
                        page_revision_id: 0,
                    },
                    page_title: conv.page_title.clone(),
                    heading: conv.heading.clone(),
                });
            }
            let rebuilt = conv.with_appended([]);
            if rebuilt != **conv {
                payloads.push(EventPayload::ConversationUpdated((**conv).clone()));
            }
        }
        for history in self.histories.values() {
            payloads.extend(history.points().iter().cloned().map(EventPayload::ForecastPoint));
        }
        payloads.extend(self.watches.values().cloned().map(EventPayload::WatchCreated));
        payloads.extend(self.alerts.iter().cloned().map(EventPayload::AlertEmitted));
        for (page, p) in &self.pages {
            payloads.push(EventPayload::RevisionProcessed {
                page_title: page.clone(),
                revision_id: p.revision_id,
                revision_time: p.revision_time,
            });
        }
        let first = (self.last_sequence_no + 1).saturating_sub(payloads.len() as u64).max(1);
        payloads
            .into_iter()
            .enumerate()
            .map(|(i, payload)| EventLogEntry { sequence_no: first + i as u64, applied_at, batch_rest: 0, payload })
            .collect()
    }
}

/// Fold entries into a state, skipping those at or below its sequence
/// number. Stops at the first entry that fails validation.
pub fn replay_entries<'a>(
    mut state: StoreState,
    entries: impl IntoIterator<Item = &'a EventLogEntry>,
) -> (StoreState, Option<String>) {
    for entry in entries {
        if entry.sequence_no <= state.last_sequence_no {
            continue;
        }
        if let Err(e) = state.try_apply(entry.sequence_no, &entry.payload) {
            return (state, Some(format!("entry {} ({}): {e}", entry.sequence_no, entry.payload.kind())));
        }
    }
    (state, None)
}
