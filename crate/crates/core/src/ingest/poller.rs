use std::collections::BTreeMap;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Serialize;
use tracing::{debug, warn};

use super::{delta_between, IngestError, PageConfig, PageDelta, RevisionSnapshot, RevisionSource};

/// Retry delay never exceeds this multiple of the page's poll interval.
pub const MAX_BACKOFF_FACTOR: u32 = 10;

/// Per-page polling state.
///
/// Deltas always span the last *acknowledged* revision to the newest fetched
/// one, so a delta that downstream never acknowledged is recomputed (and
/// widened) on the next tick instead of being lost.
#[derive(Debug, Default)]
pub struct Poller {
    pages: BTreeMap<String, PageState>,
}

#[derive(Debug)]
struct PageState {
    config: PageConfig,
    acked: Option<RevisionSnapshot>,
    pending: Option<RevisionSnapshot>,
    failures: u32,
    next_due: Option<DateTime<Utc>>,
    disabled: bool,
    last_poll: Option<DateTime<Utc>>,
    last_error: Option<String>,
}

#[derive(Debug, Default)]
pub struct TickReport {
    pub deltas: Vec<PageDelta>,
    pub errors: Vec<(String, IngestError)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageStatus {
    pub page_title: String,
    pub enabled: bool,
    pub last_seen_revision: u64,
    pub last_poll: Option<DateTime<Utc>>,
    pub consecutive_failures: u32,
    pub last_error: Option<String>,
}

impl Poller {
    pub fn new(configs: impl IntoIterator<Item = PageConfig>) -> Self {
        let pages = configs
            .into_iter()
            .map(|config| {
                let disabled = !config.enabled;
                (
                    config.page_title.clone(),
                    PageState {
                        config,
                        acked: None,
                        pending: None,
                        failures: 0,
                        next_due: None,
                        disabled,
                        last_poll: None,
                        last_error: None,
                    },
                )
            })
            .collect();
        Poller { pages }
    }

    /// Last acknowledged revision id (0 if none).
    pub fn last_seen(&self, page_title: &str) -> u64 {
        self.pages
            .get(page_title)
            .and_then(|p| p.acked.as_ref())
            .map_or(0, |s| s.revision_id)
    }

    pub fn is_enabled(&self, page_title: &str) -> bool {
        self.pages.get(page_title).is_some_and(|p| !p.disabled)
    }

    /// Make every enabled page due on the next tick regardless of backoff.
    pub fn mark_all_due(&mut self) {
        for page in self.pages.values_mut() {
            page.next_due = None;
        }
    }

    pub fn status(&self) -> Vec<PageStatus> {
        self.pages
            .values()
            .map(|p| PageStatus {
                page_title: p.config.page_title.clone(),
                enabled: !p.disabled,
                last_seen_revision: p.acked.as_ref().map_or(0, |s| s.revision_id),
                last_poll: p.last_poll,
                consecutive_failures: p.failures,
                last_error: p.last_error.clone(),
            })
            .collect()
    }

    /// Poll every due page once. Failures are isolated per page.
    pub fn poll_tick(&mut self, source: &mut dyn RevisionSource, now: DateTime<Utc>) -> TickReport {
        let mut report = TickReport::default();
        for (title, page) in self.pages.iter_mut() {
            if page.disabled || page.next_due.is_some_and(|due| due > now) {
                continue;
            }
            page.last_poll = Some(now);
            match page.fetch(source) {
                Ok(delta) => {
                    page.failures = 0;
                    page.last_error = None;
                    page.next_due = Some(now + as_chrono(page.config.poll_interval));
                    if let Some(delta) = delta {
                        debug!(page = %title, from = delta.old_revision_id, to = delta.new_revision_id, "delta");
                        report.deltas.push(delta);
                    }
                }
                Err(err) => {
                    page.last_error = Some(err.to_string());
                    match &err {
                        IngestError::PageGone(_) => {
                            warn!(page = %title, "page gone upstream; disabling");
                            page.disabled = true;
                        }
                        IngestError::StaleRevision { .. } => {
                            warn!(page = %title, error = %err, "stale revision ignored");
                            page.next_due = Some(now + as_chrono(page.config.poll_interval));
                        }
                        _ => {
                            page.failures += 1;
                            let delay = backoff(page.config.poll_interval, page.failures);
                            warn!(page = %title, error = %err, retry_in = ?delay, "fetch failed");
                            page.next_due = Some(now + as_chrono(delay));
                        }
                    }
                    report.errors.push((title.clone(), err));
                }
            }
        }
        report
    }

    /// Downstream finished processing the delta ending at `revision_id`.
    pub fn acknowledge(&mut self, page_title: &str, revision_id: u64) -> Result<(), IngestError> {
        let page = self
            .pages
            .get_mut(page_title)
            .ok_or_else(|| IngestError::InvalidConfig(format!("unknown page {page_title}")))?;
        match page.pending.take() {
            Some(snap) if snap.revision_id == revision_id => {
                page.acked = Some(snap);
                Ok(())
            }
            other => {
                let got = other.as_ref().map_or(0, |s| s.revision_id);
                page.pending = other;
                Err(IngestError::NotNewer {
                    page: page_title.to_string(),
                    old: got,
                    new: revision_id,
                })
            }
        }
    }
}

impl PageState {
    fn fetch(&mut self, source: &mut dyn RevisionSource) -> Result<Option<PageDelta>, IngestError> {
        let snap = source.fetch_latest(&self.config.page_title)?;
        let acked_rev = self.acked.as_ref().map_or(0, |s| s.revision_id);
        let seen = self.pending.as_ref().map_or(acked_rev, |s| s.revision_id);
        if snap.revision_id < seen {
            return Err(IngestError::StaleRevision {
                page: self.config.page_title.clone(),
                got: snap.revision_id,
                seen,
            });
        }
        if snap.revision_id == acked_rev {
            return Ok(None);
        }
        let old_text = self.acked.as_ref().map_or("", |s| s.wikitext.as_str());
        let delta = delta_between(
            &self.config.page_title,
            acked_rev,
            old_text,
            snap.revision_id,
            snap.revision_time,
            &snap.wikitext,
        );
        self.pending = Some(snap);
        Ok(Some(delta))
    }
}

/// `interval * 2^failures`, capped at `MAX_BACKOFF_FACTOR * interval`.
pub fn backoff(interval: Duration, failures: u32) -> Duration {
    let factor = 1u32.checked_shl(failures.min(31)).unwrap_or(u32::MAX);
    interval * factor.min(MAX_BACKOFF_FACTOR)
}

fn as_chrono(d: Duration) -> chrono::Duration {
    chrono::Duration::from_std(d).unwrap_or(chrono::Duration::MAX)
}
