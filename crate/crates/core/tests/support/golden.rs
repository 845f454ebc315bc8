//! Hand-written wikitext fixtures against hand-derived goldens, shared with
//! the acceptance harness.
//!
//! Goldens carry no ids; the expected ids are rebuilt here from the id
//! recipe (SHA-256 over unit-separated fields, first 16 bytes in hex) so a
//! drift in either the parser or the id scheme shows up.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use talkwatch::parser::{parse_talk_page, ParseDiagnostics, ParsedPage};
use talkwatch::{CommentRecord, ConversationRecord};

pub const PAGE: &str = "Talk:Fixture";

#[derive(Deserialize)]
struct Golden {
    conversations: Vec<GoldenConversation>,
    diagnostics: GoldenDiagnostics,
}

#[derive(Deserialize)]
struct GoldenConversation {
    heading: String,
    opener: Option<DateTime<Utc>>,
    #[serde(default)]
    dup: Option<u32>,
    last_activity: Option<DateTime<Utc>>,
    comments: Vec<GoldenComment>,
}

#[derive(Deserialize)]
struct GoldenComment {
    author: String,
    posted_at: Option<DateTime<Utc>>,
    depth: u32,
    parent: Option<u32>,
    text: String,
    signed_text: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct GoldenDiagnostics {
    lead_lines_skipped: usize,
    top_level_lines_skipped: usize,
    unsigned_lines_dropped: usize,
    sections_without_signatures: usize,
    undated_signatures: usize,
    malformed_headings: usize,
    duplicate_conversation_ids: usize,
}

fn id_of(parts: &[&str]) -> String {
    let joined = parts.join("\u{1f}");
    let digest = Sha256::digest(joined.as_bytes());
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

fn stamp(t: Option<DateTime<Utc>>) -> String {
    // chrono's rfc3339 form for UTC ends in +00:00
    t.map(|t| t.format("%Y-%m-%dT%H:%M:%S+00:00").to_string()).unwrap_or_default()
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn expected(golden: &Golden) -> Vec<ConversationRecord> {
    golden
        .conversations
        .iter()
        .map(|g| {
            let opener = stamp(g.opener);
            let conversation_id = match g.dup {
                None | Some(1) => id_of(&[PAGE, &g.heading, &opener]),
                Some(n) => id_of(&[PAGE, &g.heading, &opener, &n.to_string()]),
            };
            let mut ids: Vec<String> = Vec::new();
            let comments = g
                .comments
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let signed = c.signed_text.as_deref().unwrap_or(&c.text);
                    let comment_id = id_of(&[&conversation_id, &c.author, &stamp(c.posted_at), &collapse(signed)]);
                    ids.push(comment_id.clone());
                    CommentRecord {
                        comment_id,
                        author: c.author.clone(),
                        posted_at: c.posted_at,
                        text: c.text.clone(),
                        indent_depth: c.depth,
                        parent_comment_id: c.parent.map(|p| ids[p as usize - 1].clone()),
                        ordinal: i as u32 + 1,
                    }
                })
                .collect();
            ConversationRecord {
                conversation_id,
                page_title: PAGE.to_string(),
                heading: g.heading.clone(),
                comments,
                last_activity: g.last_activity,
                is_live: true,
            }
        })
        .collect()
}

fn expected_diagnostics(d: &GoldenDiagnostics) -> ParseDiagnostics {
    ParseDiagnostics {
        lead_lines_skipped: d.lead_lines_skipped,
        top_level_lines_skipped: d.top_level_lines_skipped,
        unsigned_lines_dropped: d.unsigned_lines_dropped,
        sections_without_signatures: d.sections_without_signatures,
        undated_signatures: d.undated_signatures,
        malformed_headings: d.malformed_headings,
        duplicate_conversation_ids: d.duplicate_conversation_ids,
    }
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/parser")
}

pub fn parse_fixture(name: &str) -> ParsedPage {
    let text = std::fs::read_to_string(fixture_dir().join(format!("{name}.wikitext"))).unwrap();
    parse_talk_page(&text, PAGE)
}

pub fn fixture_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "wikitext").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

/// Compare every fixture with its golden. Returns the fixture count and the
/// total parse time.
pub fn check_fixtures() -> Result<(usize, Duration), String> {
    let names = fixture_names();
    let mut elapsed = Duration::ZERO;
    for name in &names {
        let golden_text = std::fs::read_to_string(fixture_dir().join(format!("{name}.golden.json")))
            .map_err(|e| format!("{name}: missing golden: {e}"))?;
        let golden: Golden = serde_json::from_str(&golden_text).map_err(|e| format!("{name}: {e}"))?;
        let started = Instant::now();
        let parsed = parse_fixture(name);
        elapsed += started.elapsed();
        let want = expected(&golden);
        if parsed.conversations != want {
            let i = (0..want.len().max(parsed.conversations.len()))
                .find(|&i| parsed.conversations.get(i) != want.get(i))
                .unwrap_or(0);
            return Err(format!(
                "{name}: conversation {i} differs\n got: {:?}\nwant: {:?}",
                parsed.conversations.get(i),
                want.get(i)
            ));
        }
        if parsed.diagnostics != expected_diagnostics(&golden.diagnostics) {
            return Err(format!("{name}: diagnostics {:?}", parsed.diagnostics));
        }
    }
    Ok((names.len(), elapsed))
}
