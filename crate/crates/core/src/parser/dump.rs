//! Conversation dump: newline-delimited JSON, one [`ConversationRecord`] per
//! line, timestamps in RFC 3339. See `docs/conversation-dump.md`.

use std::io::{BufRead, Write};

use thiserror::Error;

use super::ConversationRecord;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_dump<'a, W: Write>(
    mut out: W,
    conversations: impl IntoIterator<Item = &'a ConversationRecord>,
) -> Result<(), DumpError> {
    for conv in conversations {
        let line = serde_json::to_string(conv).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read a dump, validating each record's structural invariants. Blank lines
/// are ignored.
pub fn read_dump<R: BufRead>(input: R) -> Result<Vec<ConversationRecord>, DumpError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |message: String| DumpError::Invalid { line: i + 1, message };
        let conv: ConversationRecord =
            serde_json::from_str(&line).map_err(|e| invalid(e.to_string()))?;
        conv.validate().map_err(invalid)?;
        out.push(conv);
    }
    Ok(out)
}
