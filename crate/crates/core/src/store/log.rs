//! On-disk event log.
//!
//! ```text
//! file   := MAGIC record*
//! MAGIC  := "TWLOG001"                      (8 bytes)
//! record := len:u32le crc:u32le body[len]
//! body   := UTF-8 JSON of one EventLogEntry
//! crc    := CRC-32 (IEEE) of body
//! ```
//!
//! Records are appended and never rewritten. A record that is cut short or
//! fails its checksum ends the readable log, and so does a batch whose last
//! record is missing: its leading records are dropped with it.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::state::EventLogEntry;

pub const MAGIC: &[u8; 8] = b"TWLOG001";
/// Upper bound on a single record body.
pub const MAX_RECORD_LEN: u32 = 64 << 20;

/// Result of scanning a log file.
#[derive(Debug, Default)]
pub struct LogScan {
    pub entries: Vec<EventLogEntry>,
    /// File offset just past each entry's record.
    pub record_ends: Vec<u64>,
    /// Byte length of the valid prefix (header plus whole records).
    pub valid_len: u64,
    pub file_len: u64,
    /// Why scanning stopped before the end of the file.
    pub problem: Option<String>,
}

pub fn encode_record(entry: &EventLogEntry) -> Vec<u8> {
    let body = serde_json::to_vec(entry).expect("log entries serialize");
    let mut out = Vec::with_capacity(body.len() + 8);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decode records from `bytes`, which start just after the header.
pub fn decode_records(bytes: &[u8]) -> (Vec<EventLogEntry>, usize, Option<String>) {
    let mut entries: Vec<EventLogEntry> = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let rest = &bytes[pos..];
        if rest.len() < 8 {
            return (entries, pos, Some(format!("truncated record header at offset {pos}")));
        }
        let len = u32::from_le_bytes(rest[..4].try_into().unwrap());
        let crc = u32::from_le_bytes(rest[4..8].try_into().unwrap());
        if len > MAX_RECORD_LEN {
            return (entries, pos, Some(format!("implausible record length {len} at offset {pos}")));
        }
        let Some(body) = rest.get(8..8 + len as usize) else {
            return (entries, pos, Some(format!("truncated record body at offset {pos}")));
        };
        if crc32fast::hash(body) != crc {
            return (entries, pos, Some(format!("checksum mismatch at offset {pos}")));
        }
        let entry: EventLogEntry = match serde_json::from_slice(body) {
            Ok(e) => e,
            Err(e) => return (entries, pos, Some(format!("undecodable record at offset {pos}: {e}"))),
        };
        let prev = entries.last().map_or(0, |e| e.sequence_no);
        if entry.sequence_no <= prev {
            let problem = format!("sequence_no {} after {prev} at offset {pos}", entry.sequence_no);
            return (entries, pos, Some(problem));
        }
        entries.push(entry);
        pos += 8 + len as usize;
    }
    (entries, pos, None)
}

pub fn scan(path: &Path) -> io::Result<LogScan> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let file_len = bytes.len() as u64;
    if bytes.is_empty() {
        return Ok(LogScan { file_len, ..Default::default() });
    }
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("{} is not an event log", path.display())));
    }
    let body = &bytes[MAGIC.len()..];
    let (mut entries, used, mut problem) = decode_records(body);
    let mut record_ends = Vec::with_capacity(entries.len());
    let mut pos = 0usize;
    for _ in &entries {
        let len = u32::from_le_bytes(body[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 8 + len;
        record_ends.push((MAGIC.len() + pos) as u64);
    }
    let mut valid_len = (MAGIC.len() + used) as u64;
    if entries.last().is_some_and(|e| e.batch_rest > 0) {
        let keep = entries.iter().rposition(|e| e.batch_rest == 0).map_or(0, |i| i + 1);
        let cut = entries.len() - keep;
        entries.truncate(keep);
        record_ends.truncate(keep);
        valid_len = record_ends.last().copied().unwrap_or(MAGIC.len() as u64);
        let why = format!("last batch incomplete; {cut} records dropped");
        problem = Some(problem.map_or(why.clone(), |p| format!("{p}; {why}")));
    }
    Ok(LogScan { entries, record_ends, valid_len, file_len, problem })
}

/// Append handle positioned after the last valid record.
#[derive(Debug)]
pub struct LogWriter {
    file: File,
    path: PathBuf,
}

impl LogWriter {
    /// Opens (creating if needed) the log and cuts off anything past
    /// `valid_len`. Discarded bytes are first copied aside to
    /// `<log>.discarded-<offset>` so that nothing is silently lost.
    pub fn open(path: &Path, valid_len: u64) -> io::Result<Self> {
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path)?;
        let len = file.metadata()?.len();
        if len == 0 {
            file.write_all(MAGIC)?;
            file.sync_all()?;
        } else if valid_len < len {
            let keep = valid_len.max(MAGIC.len() as u64);
            let mut tail = Vec::new();
            file.seek(SeekFrom::Start(keep))?;
            file.read_to_end(&mut tail)?;
            let aside = PathBuf::from(format!("{}.discarded-{keep}", path.display()));
            std::fs::write(&aside, &tail)?;
            file.set_len(keep)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(LogWriter { file, path: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Write all records and fsync once.
    pub fn append(&mut self, entries: &[EventLogEntry]) -> io::Result<()> {
        let mut buf = Vec::new();
        for e in entries {
            buf.extend(encode_record(e));
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()
    }
}
