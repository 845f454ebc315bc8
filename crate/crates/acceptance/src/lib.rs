//! Worker for the kill-and-recover check. The `crash-worker` binary runs it
//! against an on-disk log so it can be killed at arbitrary points; the
//! harness runs it in memory for the uninterrupted reference.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use talkwatch::forecast::BaselineScorer;
use talkwatch::ingest::{FixtureTransport, PageConfig, DEFAULT_POLL_INTERVAL};
use talkwatch::pipeline::Monitor;
use talkwatch::ranking::{build_ranking, RankingConfig, RankingEntry, WatchItem};
use talkwatch::store::EventPayload;
use talkwatch::{Store, StoreState};

pub const WATCHER: &str = "crash-test";
pub const WATCH_THRESHOLD: f64 = 0.3;
pub const WATCHED_HEADING: &str = "Infobox photo";

pub fn fixture_roots() -> Vec<PathBuf> {
    let base = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../replay/fixtures");
    vec![base.join("escalation"), base.join("pleasant")]
}

/// Fixed so a restarted worker recreates the same watch id.
pub fn watch_created_at() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 3, 14, 9, 0, 0).unwrap()
}

/// Clock for comparing final rankings.
pub fn ranking_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 3, 14, 11, 0, 0).unwrap()
}

pub fn final_ranking(state: &StoreState) -> Vec<RankingEntry> {
    build_ranking(state.scored_conversations(), ranking_time(), &RankingConfig::default())
}

/// Tick over the fixtures on the logical clock until every revision is
/// read, then once more so anything left unscored by a crash is finished.
/// The watch on the escalating thread is added as soon as it exists.
pub fn run_worker(store: Arc<Store>, tick_delay: Duration, mut on_tick: impl FnMut(usize)) -> Result<(), String> {
    let source = FixtureTransport::open_all(&fixture_roots()).map_err(|e| e.to_string())?;
    let pages = source
        .page_titles()
        .into_iter()
        .map(|t| PageConfig::new(t, DEFAULT_POLL_INTERVAL, true))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mut monitor = Monitor::new(source, pages, Arc::new(BaselineScorer::bundled()), store.clone());
    let mut n = 0;
    loop {
        let titles = monitor.source().page_titles();
        let now = titles
            .iter()
            .filter_map(|t| monitor.source().next_revision_time(t))
            .max()
            .ok_or("no fixture pages")?;
        monitor.poller_mut().mark_all_due();
        monitor.tick(now).map_err(|e| e.to_string())?;
        ensure_watch(&store)?;
        n += 1;
        on_tick(n);
        if !monitor.source().has_pending() {
            break;
        }
        std::thread::sleep(tick_delay);
    }
    // a crash between ingest and scoring leaves points owed
    monitor.poller_mut().mark_all_due();
    let now = ranking_time();
    monitor.tick(now).map_err(|e| e.to_string())?;
    Ok(())
}

fn ensure_watch(store: &Store) -> Result<(), String> {
    let state = store.snapshot();
    let Some(conv) = state.conversations.values().find(|c| c.heading == WATCHED_HEADING) else {
        return Ok(());
    };
    if state.watch_for(WATCHER, &conv.conversation_id).is_some() {
        return Ok(());
    }
    let watch = WatchItem::new(WATCHER, &conv.conversation_id, WATCH_THRESHOLD, watch_created_at())
        .map_err(|e| e.to_string())?;
    store.append(EventPayload::WatchCreated(watch), watch_created_at()).map_err(|e| e.to_string())?;
    Ok(())
}
