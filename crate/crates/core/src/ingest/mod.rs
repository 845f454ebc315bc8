//! Revision polling and line deltas between successive page revisions.

pub mod diff;
mod fixture;
mod mediawiki;
mod poller;

use std::collections::HashSet;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixture::FixtureTransport;
pub use mediawiki::{MediaWikiClient, DEFAULT_API_URL, DEFAULT_REQUEST_TIMEOUT, DEFAULT_USER_AGENT};
pub use poller::{PageStatus, Poller, TickReport};

pub const DEFAULT_POLL_INTERVAL: Duration = Duration::from_secs(60);
pub const MIN_POLL_INTERVAL: Duration = Duration::from_secs(5);

/// Talk pages tracked when the configuration lists none.
pub const DEFAULT_PAGES: [&str; 8] = [
    "Talk:Barack_Obama",
    "Talk:Bernie_Sanders",
    "Talk:Coronavirus_disease_2019",
    "Talk:COVID-19_pandemic",
    "Talk:Donald_Trump",
    "Talk:Joe_Biden",
    "Talk:Kim_Jong-un",
    "Talk:Global_warming",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("transport error for {page}: {message}")]
    Transport { page: String, message: String },
    #[error("page {0} is missing or deleted")]
    PageGone(String),
    #[error("protocol error for {page}: {message}")]
    Protocol { page: String, message: String },
    #[error("stale revision {got} for {page}: already saw {seen}")]
    StaleRevision { page: String, got: u64, seen: u64 },
    #[error("invalid page config: {0}")]
    InvalidConfig(String),
    #[error("delta requested across different pages: {0} vs {1}")]
    PageMismatch(String, String),
    #[error("revision {new} of {page} does not follow {old}")]
    NotNewer { page: String, old: u64, new: u64 },
    #[error("delta does not apply to the given text: {0}")]
    DeltaMismatch(String),
    #[error("fixture error: {0}")]
    Fixture(String),
}

impl IngestError {
    /// Whether the failure is worth retrying with backoff.
    pub fn is_retryable(&self) -> bool {
        matches!(self, IngestError::Transport { .. } | IngestError::Protocol { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageConfig {
    pub page_title: String,
    #[serde(with = "duration_secs")]
    pub poll_interval: Duration,
    pub enabled: bool,
}

impl PageConfig {
    pub fn new(
        page_title: impl Into<String>,
        poll_interval: Duration,
        enabled: bool,
    ) -> Result<Self, IngestError> {
        let page_title = page_title.into();
        if page_title.trim().is_empty() {
            return Err(IngestError::InvalidConfig("empty page title".into()));
        }
        if !is_talk_title(&page_title) {
            return Err(IngestError::InvalidConfig(format!(
                "{page_title} is not in a Talk namespace"
            )));
        }
        if poll_interval < MIN_POLL_INTERVAL {
            return Err(IngestError::InvalidConfig(format!(
                "poll interval for {page_title} is {}s, minimum is {}s",
                poll_interval.as_secs_f64(),
                MIN_POLL_INTERVAL.as_secs()
            )));
        }
        Ok(PageConfig { page_title, poll_interval, enabled })
    }
}

/// `Talk:`, `User talk:`, `Wikipedia_talk:` and friends.
pub fn is_talk_title(title: &str) -> bool {
    let Some((namespace, rest)) = title.split_once(':') else {
        return false;
    };
    if rest.trim().is_empty() {
        return false;
    }
    let ns = namespace.trim().replace('_', " ").to_lowercase();
    ns == "talk" || ns.ends_with(" talk")
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_secs())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionSnapshot {
    pub page_title: String,
    pub revision_id: u64,
    pub wikitext: String,
    pub fetched_at: DateTime<Utc>,
    pub revision_time: DateTime<Utc>,
}

/// Anything that can hand out the newest revision of a page.
pub trait RevisionSource {
    fn fetch_latest(&mut self, page_title: &str) -> Result<RevisionSnapshot, IngestError>;

    /// Skip everything up to and including `revision_id`. Sources that always
    /// return the live head ignore this.
    fn resume_after(&mut self, _page_title: &str, _revision_id: u64) {}
}

impl<T: RevisionSource + ?Sized> RevisionSource for Box<T> {
    fn fetch_latest(&mut self, page_title: &str) -> Result<RevisionSnapshot, IngestError> {
        (**self).fetch_latest(page_title)
    }

    fn resume_after(&mut self, page_title: &str, revision_id: u64) {
        (**self).resume_after(page_title, revision_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDelta {
    pub page_title: String,
    /// 0 when there is no previous revision.
    pub old_revision_id: u64,
    pub new_revision_id: u64,
    pub new_revision_time: DateTime<Utc>,
    pub added_lines: Vec<(usize, String)>,
    pub removed_lines: Vec<(usize, String)>,
}

impl PageDelta {
    pub fn is_empty(&self) -> bool {
        self.added_lines.is_empty() && self.removed_lines.is_empty()
    }

    /// Rebuild the new text from the old one.
    pub fn apply(&self, old_text: &str) -> Result<String, IngestError> {
        let old = diff::split_lines(old_text);
        let mut removed = HashSet::with_capacity(self.removed_lines.len());
        for (idx, text) in &self.removed_lines {
            match old.get(*idx) {
                Some(line) if line == text => {
                    removed.insert(*idx);
                }
                _ => {
                    return Err(IngestError::DeltaMismatch(format!(
                        "old line {idx} does not match the removed text"
                    )))
                }
            }
        }
        let mut kept = old
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, l)| *l);
        let new_len = old.len() - removed.len() + self.added_lines.len();
        let mut new_lines: Vec<&str> = Vec::with_capacity(new_len);
        let mut added = self.added_lines.iter().peekable();
        for pos in 0..new_len {
            match added.peek() {
                Some((idx, text)) if *idx == pos => {
                    new_lines.push(text);
                    added.next();
                }
                _ => match kept.next() {
                    Some(line) => new_lines.push(line),
                    None => {
                        return Err(IngestError::DeltaMismatch(
                            "added line indices out of order".into(),
                        ))
                    }
                },
            }
        }
        if added.next().is_some() || kept.next().is_some() {
            return Err(IngestError::DeltaMismatch(
                "added line index beyond the end of the new text".into(),
            ));
        }
        Ok(diff::join_lines(&new_lines))
    }
}

/// Line-level minimal delta between two snapshots of the same page.
pub fn compute_delta(
    old: &RevisionSnapshot,
    new: &RevisionSnapshot,
) -> Result<PageDelta, IngestError> {
    if old.page_title != new.page_title {
        return Err(IngestError::PageMismatch(
            old.page_title.clone(),
            new.page_title.clone(),
        ));
    }
    if new.revision_id <= old.revision_id {
        return Err(IngestError::NotNewer {
            page: new.page_title.clone(),
            old: old.revision_id,
            new: new.revision_id,
        });
    }
    Ok(delta_between(
        &new.page_title,
        old.revision_id,
        &old.wikitext,
        new.revision_id,
        new.revision_time,
        &new.wikitext,
    ))
}

pub(crate) fn delta_between(
    page_title: &str,
    old_revision_id: u64,
    old_text: &str,
    new_revision_id: u64,
    new_revision_time: DateTime<Utc>,
    new_text: &str,
) -> PageDelta {
    let old_lines = diff::split_lines(old_text);
    let new_lines = diff::split_lines(new_text);
    let edits = diff::diff_lines(&old_lines, &new_lines);
    PageDelta {
        page_title: page_title.to_string(),
        old_revision_id,
        new_revision_id,
        new_revision_time,
        added_lines: edits
            .added
            .into_iter()
            .map(|i| (i, new_lines[i].to_string()))
            .collect(),
        removed_lines: edits
            .removed
            .into_iter()
            .map(|i| (i, old_lines[i].to_string()))
            .collect(),
    }
}
