//! Talk-page wikitext to threaded conversations, and new-comment detection
//! between successive parses of the same page.

pub mod dump;
mod signature;
mod thread;

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::ids::{normalize_whitespace, stable_id};

pub use signature::{extract_signature, Signature};
pub use thread::{thread_comments, ThreadedComment};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub comment_id: String,
    pub author: String,
    pub posted_at: Option<DateTime<Utc>>,
    pub text: String,
    pub indent_depth: u32,
    pub parent_comment_id: Option<String>,
    pub ordinal: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub conversation_id: String,
    pub page_title: String,
    pub heading: String,
    pub comments: Vec<CommentRecord>,
    pub last_activity: Option<DateTime<Utc>>,
    pub is_live: bool,
}

impl ConversationRecord {
    pub fn comment_count(&self) -> usize {
        self.comments.len()
    }

    /// The record after `comments` are appended in order, as seen by a
    /// consumer that only receives new-comment events.
    pub fn with_appended<'a>(&self, comments: impl IntoIterator<Item = &'a CommentRecord>) -> Self {
        let mut next = self.clone();
        for c in comments {
            next.comments.push(c.clone());
            next.last_activity = max_time(next.last_activity, c.posted_at);
        }
        next.is_live = true;
        next
    }

    /// Check the structural invariants of a conversation.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen: HashMap<&str, &CommentRecord> = HashMap::new();
        for (i, c) in self.comments.iter().enumerate() {
            if c.ordinal as usize != i + 1 {
                return Err(format!("comment {} has ordinal {}, expected {}", c.comment_id, c.ordinal, i + 1));
            }
            if let Some(pid) = &c.parent_comment_id {
                let parent = seen
                    .get(pid.as_str())
                    .ok_or_else(|| format!("parent {pid} of {} is not an earlier comment", c.comment_id))?;
                if parent.indent_depth >= c.indent_depth {
                    return Err(format!("parent of {} is not shallower", c.comment_id));
                }
            }
            seen.insert(&c.comment_id, c);
        }
        let expected = self.comments.iter().fold(None, |acc, c| max_time(acc, c.posted_at));
        if self.last_activity != expected {
            return Err(format!("last_activity of {} is not the latest comment time", self.conversation_id));
        }
        Ok(())
    }
}

fn max_time(a: Option<DateTime<Utc>>, b: Option<DateTime<Utc>>) -> Option<DateTime<Utc>> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewCommentEvent {
    pub conversation_id: String,
    pub comment: CommentRecord,
    pub page_revision_id: u64,
}

/// Counters for material the parser skipped. Never fatal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostics {
    /// Lines before the first level-2 heading.
    pub lead_lines_skipped: usize,
    /// Lines under level-1 headings, which do not form conversations.
    pub top_level_lines_skipped: usize,
    /// Section-initial unsigned material without any following signature.
    pub unsigned_lines_dropped: usize,
    pub sections_without_signatures: usize,
    pub undated_signatures: usize,
    /// Lines that open like a heading but do not close like one.
    pub malformed_headings: usize,
    /// Conversations whose natural id collided with an earlier one on the page.
    pub duplicate_conversation_ids: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedPage {
    pub conversations: Vec<ConversationRecord>,
    pub diagnostics: ParseDiagnostics,
}

#[derive(Debug, PartialEq, Eq)]
enum Line<'a> {
    Section(&'a str),
    TopLevel,
    Body,
}

fn classify(line: &str) -> Line<'_> {
    let t = line.trim();
    if !t.starts_with('=') {
        return Line::Body;
    }
    let open = t.chars().take_while(|&c| c == '=').count();
    let close = t.chars().rev().take_while(|&c| c == '=').count();
    if open == t.len() || close == 0 {
        return Line::Body;
    }
    let level = open.min(close);
    let inner = t[level..t.len() - level].trim();
    match level {
        1 => Line::TopLevel,
        2 if !inner.is_empty() => Line::Section(inner),
        _ => Line::Body,
    }
}

/// Parse a full page into conversations, one per level-2 section that has at
/// least one signed comment. Deeper subsections belong to their enclosing
/// level-2 section.
pub fn parse_talk_page(wikitext: &str, page_title: &str) -> ParsedPage {
    let mut diagnostics = ParseDiagnostics::default();
    let mut sections: Vec<(&str, Vec<&str>)> = Vec::new();
    let mut in_top_level = false;
    for line in wikitext.lines() {
        match classify(line) {
            Line::Section(heading) => {
                in_top_level = false;
                sections.push((heading, Vec::new()));
            }
            Line::TopLevel => {
                in_top_level = true;
            }
            Line::Body => {
                let t = line.trim();
                if t.starts_with("==") && !thread::is_heading(t) {
                    diagnostics.malformed_headings += 1;
                }
                if in_top_level {
                    diagnostics.top_level_lines_skipped += usize::from(!t.is_empty());
                } else if let Some((_, lines)) = sections.last_mut() {
                    lines.push(line);
                } else if !t.is_empty() {
                    diagnostics.lead_lines_skipped += 1;
                }
            }
        }
    }

    let mut used_ids: HashSet<String> = HashSet::new();
    let mut conversations = Vec::new();
    for (heading, lines) in sections {
        let (threaded, stats) = thread::thread_with_stats(&lines);
        diagnostics.unsigned_lines_dropped += stats.unsigned_lines_dropped;
        diagnostics.undated_signatures += stats.undated_signatures;
        if threaded.is_empty() {
            diagnostics.sections_without_signatures += 1;
            continue;
        }
        let heading = normalize_whitespace(heading);
        // The opener is the first comment on the page, not the earliest post.
        let opener_time = first_on_page(&lines)
            .and_then(|s| s.posted_at)
            .map(|t| t.to_rfc3339())
            .unwrap_or_default();
        let mut conversation_id = stable_id(&[page_title, &heading, &opener_time]);
        let mut n = 1;
        while used_ids.contains(&conversation_id) {
            n += 1;
            diagnostics.duplicate_conversation_ids += 1;
            conversation_id = stable_id(&[page_title, &heading, &opener_time, &n.to_string()]);
        }
        used_ids.insert(conversation_id.clone());
        conversations.push(build_conversation(conversation_id, page_title, heading, threaded));
    }
    if diagnostics != ParseDiagnostics::default() {
        debug!(page = page_title, ?diagnostics, "parse diagnostics");
    }
    ParsedPage { conversations, diagnostics }
}

fn first_on_page(lines: &[&str]) -> Option<Signature> {
    lines.iter().find_map(|l| extract_signature(l))
}

fn build_conversation(
    conversation_id: String,
    page_title: &str,
    heading: String,
    threaded: Vec<ThreadedComment>,
) -> ConversationRecord {
    let mut ids: Vec<String> = Vec::with_capacity(threaded.len());
    let mut comments = Vec::with_capacity(threaded.len());
    let mut last_activity = None;
    for c in threaded {
        let stamp = c.posted_at.map(|t| t.to_rfc3339()).unwrap_or_default();
        let comment_id = stable_id(&[
            &conversation_id,
            &c.author,
            &stamp,
            &normalize_whitespace(&c.signed_text),
        ]);
        last_activity = max_time(last_activity, c.posted_at);
        let parent_comment_id = c.parent_ordinal.map(|p| ids[p as usize - 1].clone());
        ids.push(comment_id.clone());
        comments.push(CommentRecord {
            comment_id,
            author: c.author,
            posted_at: c.posted_at,
            text: c.text,
            indent_depth: c.indent_depth,
            parent_comment_id,
            ordinal: c.ordinal,
        });
    }
    ConversationRecord {
        conversation_id,
        page_title: page_title.to_string(),
        heading,
        comments,
        last_activity,
        is_live: true,
    }
}

/// New-comment events between two parses of one page.
///
/// A comment is new when its ordinal exceeds the comment count previously
/// known for its conversation (0 for conversations not seen before). Edited
/// comments keep their ordinal and produce no event.
pub fn detect_new_comments(
    previous: &[ConversationRecord],
    current: &[ConversationRecord],
    page_revision_id: u64,
) -> Vec<NewCommentEvent> {
    let known: HashMap<&str, usize> = previous
        .iter()
        .map(|c| (c.conversation_id.as_str(), c.comments.len()))
        .collect();
    current
        .iter()
        .flat_map(|conv| {
            let seen = known.get(conv.conversation_id.as_str()).copied().unwrap_or(0);
            conv.comments.iter().skip(seen).map(move |comment| NewCommentEvent {
                conversation_id: conv.conversation_id.clone(),
                comment: comment.clone(),
                page_revision_id,
            })
        })
        .collect()
}

/// Ids of conversations present before but gone from the current parse
/// (archived, deleted or renamed).
pub fn vanished_conversations(
    previous: &[ConversationRecord],
    current: &[ConversationRecord],
) -> Vec<String> {
    let now: HashSet<&str> = current.iter().map(|c| c.conversation_id.as_str()).collect();
    previous
        .iter()
        .filter(|c| !now.contains(c.conversation_id.as_str()))
        .map(|c| c.conversation_id.clone())
        .collect()
}
