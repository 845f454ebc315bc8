use chrono::{DateTime, Utc};

use super::signature::extract_signature;

/// A comment before it is tied to a conversation identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadedComment {
    pub author: String,
    pub posted_at: Option<DateTime<Utc>>,
    /// Body with the signature removed, including any unsigned material
    /// that trails it.
    pub text: String,
    /// Body of the signed run only; trailing unsigned material is excluded so
    /// the comment's identity does not change when someone appends below it.
    pub signed_text: String,
    pub indent_depth: u32,
    /// 1-based position in posting order.
    pub ordinal: u32,
    pub parent_ordinal: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct ThreadStats {
    pub unsigned_lines_dropped: usize,
    pub undated_signatures: usize,
}

/// Group the lines of one section into signed comments and thread them.
///
/// A comment is a maximal run of lines ending in a signature line. Its depth
/// is the number of leading `:`/`*`/`#` markers on its first line and its
/// parent is the nearest preceding comment of strictly smaller depth.
/// Unsigned lines after the last signature are folded into that comment;
/// a section without any signature yields nothing.
///
/// Ordinals follow posting time. Undated comments stay directly behind their
/// predecessor on the page.
pub fn thread_comments(section_lines: &[&str]) -> Vec<ThreadedComment> {
    thread_with_stats(section_lines).0
}

pub(crate) fn thread_with_stats(section_lines: &[&str]) -> (Vec<ThreadedComment>, ThreadStats) {
    let mut stats = ThreadStats::default();
    let mut page_order: Vec<ThreadedComment> = Vec::new();
    let mut run: Vec<&str> = Vec::new();

    for &line in section_lines {
        if line.trim().is_empty() || is_heading(line) {
            continue;
        }
        run.push(line);
        let Some(sig) = extract_signature(line) else { continue };
        if sig.posted_at.is_none() {
            stats.undated_signatures += 1;
        }
        let depth = indent_depth(run[0]);
        let mut body: Vec<String> = run[..run.len() - 1].iter().map(|l| strip_markers(l)).collect();
        let before = strip_markers(&line[..sig.start]);
        let before = before.trim_end_matches(['-', '—', '–', '~', ' ', '\t']);
        let after = line[sig.end..].trim();
        let last = match (before.is_empty(), after.is_empty()) {
            (_, true) => before.to_string(),
            (true, false) => after.to_string(),
            (false, false) => format!("{before} {after}"),
        };
        body.push(last);
        body.retain(|l| !l.is_empty());
        let text = body.join("\n");
        page_order.push(ThreadedComment {
            author: sig.author,
            posted_at: sig.posted_at,
            signed_text: text.clone(),
            text,
            indent_depth: depth,
            ordinal: 0,
            parent_ordinal: None,
        });
        run.clear();
    }

    if !run.is_empty() {
        match page_order.last_mut() {
            Some(prev) => {
                for line in &run {
                    let l = strip_markers(line);
                    if !l.is_empty() {
                        if !prev.text.is_empty() {
                            prev.text.push('\n');
                        }
                        prev.text.push_str(&l);
                    }
                }
            }
            None => stats.unsigned_lines_dropped += run.len(),
        }
    }

    (order_and_link(page_order), stats)
}

fn order_and_link(mut page_order: Vec<ThreadedComment>) -> Vec<ThreadedComment> {
    let n = page_order.len();
    // Page-order parent: nearest preceding comment with a smaller depth.
    let mut page_parent: Vec<Option<usize>> = vec![None; n];
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..n {
        let d = page_order[i].indent_depth;
        while stack.last().is_some_and(|&j| page_order[j].indent_depth >= d) {
            stack.pop();
        }
        page_parent[i] = stack.last().copied();
        stack.push(i);
    }

    // Posting order: stable sort on an effective time where undated comments
    // inherit the latest time seen above them.
    let mut effective = Vec::with_capacity(n);
    let mut running: Option<DateTime<Utc>> = None;
    for c in &page_order {
        if let Some(t) = c.posted_at {
            running = Some(running.map_or(t, |r| r.max(t)));
        }
        effective.push(c.posted_at.or(running));
    }
    let mut by_time: Vec<usize> = (0..n).collect();
    by_time.sort_by_key(|&i| effective[i]);
    let mut ordinal_of = vec![0u32; n];
    for (pos, &i) in by_time.iter().enumerate() {
        ordinal_of[i] = pos as u32 + 1;
    }

    for i in 0..n {
        // Climb until the ancestor was posted earlier than the reply.
        let mut parent = page_parent[i];
        while let Some(p) = parent {
            if ordinal_of[p] < ordinal_of[i] {
                break;
            }
            parent = page_parent[p];
        }
        page_order[i].ordinal = ordinal_of[i];
        page_order[i].parent_ordinal = parent.map(|p| ordinal_of[p]);
    }
    page_order.sort_by_key(|c| c.ordinal);
    page_order
}

pub(crate) fn is_heading(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 3 && t.starts_with('=') && t.ends_with('=')
}

pub(crate) fn indent_depth(line: &str) -> u32 {
    line.trim_start_matches([' ', '\t'])
        .chars()
        .take_while(|c| matches!(c, ':' | '*' | '#'))
        .count() as u32
}

fn strip_markers(line: &str) -> String {
    line.trim_start_matches([' ', '\t'])
        .trim_start_matches([':', '*', '#'])
        .trim()
        .to_string()
}
