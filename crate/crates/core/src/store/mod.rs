//! Event-sourced persistence: one append-only log file plus an optional
//! compacted snapshot next to it.

pub mod log;
mod state;

use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use tracing::{info, warn};

pub use state::{replay_entries, EventLogEntry, EventPayload, PageProgress, StoreState};

use log::LogWriter;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    /// The payload breaks an invariant; nothing was written.
    #[error("rejected event: {0}")]
    Rejected(String),
    #[error("store I/O failure: {0}")]
    Io(#[from] io::Error),
    /// A previous write failed; the store only serves reads from now on.
    #[error("store halted after an earlier write failure")]
    Halted,
}

impl StoreError {
    pub fn is_fatal(&self) -> bool {
        !matches!(self, StoreError::Rejected(_))
    }
}

/// What `Store::open` found on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    pub snapshot_sequence_no: Option<u64>,
    pub entries_in_log: usize,
    pub entries_applied: usize,
    pub last_sequence_no: u64,
    pub discarded_bytes: u64,
    pub diagnostic: Option<String>,
}

pub fn snapshot_path(log_path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.snapshot", log_path.display()))
}

/// Rebuild state from the log file alone.
pub fn replay_from_log(path: &Path) -> io::Result<(StoreState, Option<String>)> {
    let scan = log::scan(path)?;
    let (state, err) = replay_entries(StoreState::default(), &scan.entries);
    Ok((state, err.or(scan.problem)))
}

/// Single writer, any number of snapshot readers.
#[derive(Debug)]
pub struct Store {
    writer: Mutex<Option<LogWriter>>,
    state: RwLock<Arc<StoreState>>,
    halted: AtomicBool,
}

impl Store {
    /// A store that keeps everything in memory.
    pub fn in_memory() -> Self {
        Store {
            writer: Mutex::new(None),
            state: RwLock::new(Arc::new(StoreState::default())),
            halted: AtomicBool::new(false),
        }
    }

    /// Open or create the log at `path`, recovering state from the snapshot
    /// (if readable) and the log entries after it. A torn or corrupt tail is
    /// cut off so that later appends stay readable.
    pub fn open(path: &Path) -> Result<(Self, RecoveryReport), StoreError> {
        let mut report = RecoveryReport::default();
        let scan = match std::fs::metadata(path) {
            Ok(_) => log::scan(path)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => log::LogScan::default(),
            Err(e) => return Err(e.into()),
        };
        report.entries_in_log = scan.entries.len();

        let mut base = StoreState::default();
        match std::fs::read(snapshot_path(path)) {
            Ok(bytes) => match serde_json::from_slice::<StoreState>(&bytes) {
                Ok(snap) if scan.entries.last().map_or(snap.last_sequence_no == 0, |e| e.sequence_no >= snap.last_sequence_no) => {
                    report.snapshot_sequence_no = Some(snap.last_sequence_no);
                    base = snap;
                }
                Ok(_) => warn!("snapshot is ahead of the log; replaying the full log instead"),
                Err(e) => warn!("unreadable snapshot ignored: {e}"),
            },
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        let before = base.last_sequence_no;
        let (state, replay_problem) = replay_entries(base, &scan.entries);
        report.entries_applied = scan.entries.iter().filter(|e| e.sequence_no > before && e.sequence_no <= state.last_sequence_no).count();
        report.last_sequence_no = state.last_sequence_no;
        report.diagnostic = replay_problem.or(scan.problem);

        // Keep only the records that replayed cleanly.
        let valid_len = if report.diagnostic.is_some() && report.entries_applied < scan.entries.len() {
            let keep = scan.entries.iter().take_while(|e| e.sequence_no <= state.last_sequence_no).count();
            keep.checked_sub(1).map_or(log::MAGIC.len() as u64, |i| scan.record_ends[i])
        } else {
            scan.valid_len
        };
        if scan.file_len > 0 {
            report.discarded_bytes = scan.file_len - valid_len;
        }
        if let Some(d) = &report.diagnostic {
            warn!(last_sequence_no = report.last_sequence_no, "log recovery stopped early: {d}");
        }
        let writer = LogWriter::open(path, valid_len)?;
        info!(
            path = %path.display(),
            last_sequence_no = report.last_sequence_no,
            applied = report.entries_applied,
            "store opened"
        );
        let store = Store {
            writer: Mutex::new(Some(writer)),
            state: RwLock::new(Arc::new(state)),
            halted: AtomicBool::new(false),
        };
        Ok((store, report))
    }

    /// Immutable view; later appends do not affect it.
    pub fn snapshot(&self) -> Arc<StoreState> {
        self.state.read().expect("state lock").clone()
    }

    pub fn is_halted(&self) -> bool {
        self.halted.load(Ordering::SeqCst)
    }

    pub fn append(&self, payload: EventPayload, applied_at: DateTime<Utc>) -> Result<u64, StoreError> {
        Ok(self.append_batch(vec![payload], applied_at)?[0])
    }

    /// Validate every payload in order, write them with one fsync, then
    /// publish the new state. Either all are accepted or none.
    pub fn append_batch(&self, payloads: Vec<EventPayload>, applied_at: DateTime<Utc>) -> Result<Vec<u64>, StoreError> {
        let mut writer = self.writer.lock().expect("writer lock");
        if self.is_halted() {
            return Err(StoreError::Halted);
        }
        if payloads.is_empty() {
            return Ok(Vec::new());
        }
        let current = self.snapshot();
        let mut next = (*current).clone();
        let mut entries = Vec::with_capacity(payloads.len());
        let count = payloads.len() as u32;
        for (i, payload) in payloads.into_iter().enumerate() {
            let seq = next.last_sequence_no + 1;
            next.try_apply(seq, &payload).map_err(StoreError::Rejected)?;
            entries.push(EventLogEntry { sequence_no: seq, applied_at, batch_rest: count - 1 - i as u32, payload });
        }
        if let Some(w) = writer.as_mut() {
            if let Err(e) = w.append(&entries) {
                self.halted.store(true, Ordering::SeqCst);
                return Err(e.into());
            }
        }
        *self.state.write().expect("state lock") = Arc::new(next);
        Ok(entries.iter().map(|e| e.sequence_no).collect())
    }

    /// Write the current state to the snapshot file. The log is kept whole.
    pub fn compact(&self) -> Result<Option<PathBuf>, StoreError> {
        let writer = self.writer.lock().expect("writer lock");
        let Some(w) = writer.as_ref() else { return Ok(None) };
        let state = self.snapshot();
        let target = snapshot_path(w.path());
        let tmp = PathBuf::from(format!("{}.tmp", target.display()));
        let bytes = serde_json::to_vec(&*state).map_err(io::Error::other)?;
        {
            use std::io::Write;
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, &target)?;
        Ok(Some(target))
    }
}
