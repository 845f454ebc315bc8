//! Background thread driving the monitor for the server.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::Utc;
use talkwatch::ingest::RevisionSource;
use talkwatch::pipeline::Monitor;
use tracing::{error, info, warn};

use crate::MonitorStatus;

pub struct MonitorHandle {
    stop: Arc<AtomicBool>,
    thread: JoinHandle<()>,
}

impl MonitorHandle {
    pub fn stop(self) {
        self.stop.store(true, Ordering::SeqCst);
        if self.thread.join().is_err() {
            error!("monitor thread panicked");
        }
    }
}

/// Tick every `period` until stopped or the store halts. A compacted
/// snapshot is written whenever `compact_every` more events have been
/// appended since the last one; 0 disables compaction.
pub fn spawn_monitor<S: RevisionSource + Send + 'static>(
    mut monitor: Monitor<S>,
    status: Arc<RwLock<MonitorStatus>>,
    period: Duration,
    compact_every: u64,
) -> MonitorHandle {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = std::thread::spawn(move || {
        let mut compacted_at = monitor.store().snapshot().last_sequence_no;
        while !flag.load(Ordering::SeqCst) {
            let now = Utc::now();
            match monitor.tick(now) {
                Ok(summary) => {
                    if summary.new_comments > 0 || summary.alerts_emitted > 0 {
                        info!(
                            new_comments = summary.new_comments,
                            points = summary.points_appended,
                            alerts = summary.alerts_emitted,
                            "tick"
                        );
                    }
                    if let Ok(mut s) = status.write() {
                        s.pages = monitor.poller().status();
                        s.last_tick = Some(now);
                        s.last_tick_errors = summary.ingest_errors.into_iter().chain(summary.scorer_errors).collect();
                    }
                }
                Err(e) => {
                    error!("monitor stopped: {e}");
                    return;
                }
            }
            let seq = monitor.store().snapshot().last_sequence_no;
            if compact_every > 0 && seq >= compacted_at + compact_every {
                match monitor.store().compact() {
                    Ok(_) => compacted_at = seq,
                    Err(e) => warn!("compaction failed: {e}"),
                }
            }
            std::thread::sleep(period);
        }
    });
    MonitorHandle { stop, thread }
}
