//! Labeled corpora: the conversation dump format with an `is_antisocial`
//! flag on every comment and an optional `derails` flag per conversation.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use talkwatch::{CommentRecord, ConversationRecord};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("inconsistent conversations: {}", format_offenders(.0))]
    Inconsistent(Vec<(String, String)>),
    #[error("corpus is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_offenders(list: &[(String, String)]) -> String {
    list.iter().map(|(id, why)| format!("{id} ({why})")).collect::<Vec<_>>().join(", ")
}

impl CorpusError {
    /// Conversation ids named by a validation failure.
    pub fn offending_ids(&self) -> Vec<&str> {
        match self {
            CorpusError::Inconsistent(list) => list.iter().map(|(id, _)| id.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledConversation {
    pub conversation: ConversationRecord,
    /// One flag per comment, in ordinal order.
    pub labels: Vec<bool>,
    pub derails: bool,
}

impl LabeledConversation {
    pub fn new(conversation: ConversationRecord, labels: Vec<bool>) -> Self {
        let derails = labels.iter().any(|&l| l);
        LabeledConversation { conversation, labels, derails }
    }

    /// Ordinal of the first antisocial comment.
    pub fn first_antisocial(&self) -> Option<u32> {
        self.labels.iter().position(|&l| l).map(|i| i as u32 + 1)
    }
}

#[derive(Serialize, Deserialize)]
struct LabeledComment {
    #[serde(flatten)]
    comment: CommentRecord,
    is_antisocial: bool,
}

#[derive(Serialize, Deserialize)]
struct LabeledRecord {
    conversation_id: String,
    page_title: String,
    heading: String,
    comments: Vec<LabeledComment>,
    last_activity: Option<DateTime<Utc>>,
    #[serde(default = "yes")]
    is_live: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    derails: Option<bool>,
}

fn yes() -> bool {
    true
}

/// Read and validate a corpus. Every structurally invalid or mislabeled
/// conversation is reported, not only the first.
pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<LabeledConversation>, CorpusError> {
    let mut out = Vec::new();
    let mut offenders = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LabeledRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Malformed { line: i + 1, message: e.to_string() })?;
        let claimed = record.derails;
        let labels: Vec<bool> = record.comments.iter().map(|c| c.is_antisocial).collect();
        let conversation = ConversationRecord {
            conversation_id: record.conversation_id,
            page_title: record.page_title,
            heading: record.heading,
            comments: record.comments.into_iter().map(|c| c.comment).collect(),
            last_activity: record.last_activity,
            is_live: record.is_live,
        };
        let labeled = LabeledConversation::new(conversation, labels);
        let id = labeled.conversation.conversation_id.clone();
        if let Err(e) = labeled.conversation.validate() {
            offenders.push((id.clone(), e));
        }
        if labeled.conversation.comments.is_empty() {
            offenders.push((id.clone(), "no comments".into()));
        }
        if claimed.is_some_and(|d| d != labeled.derails) {
            offenders.push((id.clone(), "derails disagrees with the comment labels".into()));
        }
        if !ids.insert(id.clone()) {
            offenders.push((id, "duplicate conversation_id".into()));
        }
        out.push(labeled);
    }
    if !offenders.is_empty() {
        return Err(CorpusError::Inconsistent(offenders));
    }
    if out.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(out)
}

pub fn write_corpus<'a, W: Write>(
    mut out: W,
    corpus: impl IntoIterator<Item = &'a LabeledConversation>,
) -> std::io::Result<()> {
    for item in corpus {
        let c = &item.conversation;
        let record = LabeledRecord {
            conversation_id: c.conversation_id.clone(),
            page_title: c.page_title.clone(),
            heading: c.heading.clone(),
            comments: c
                .comments
                .iter()
                .zip(&item.labels)
                .map(|(comment, &is_antisocial)| LabeledComment { comment: comment.clone(), is_antisocial })
                .collect(),
            last_activity: c.last_activity,
            is_live: c.is_live,
            derails: Some(item.derails),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
