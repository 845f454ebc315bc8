use std::sync::LazyLock;

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use regex::Regex;

static USER_LINK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\[\[\s*(?:user|user[ _]talk)\s*:\s*([^|\]\[/#\n]+)").unwrap()
});

static TIMESTAMP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(\d{1,2}):(\d{2}), (\d{1,2}) (January|February|March|April|May|June|July|August|September|October|November|December) (\d{4}) \(UTC\)",
    )
    .unwrap()
});

/// Longest run of text allowed between two links of one signature.
const MAX_SIGNATURE_GAP: usize = 80;

/// A recognised signature on one line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub author: String,
    /// Absent when the timestamp text does not denote a real date.
    pub posted_at: Option<DateTime<Utc>>,
    /// Byte offset where the signature's user link starts.
    pub start: usize,
    /// Byte offset just past the `(UTC)` of the timestamp.
    pub end: usize,
}

/// Find the last `[[User:..]]`/`[[User talk:..]]` link + timestamp pair on a
/// line. The link may be followed by arbitrary text before the timestamp.
pub fn extract_signature(line: &str) -> Option<Signature> {
    let stamps: Vec<_> = TIMESTAMP.captures_iter(line).collect();
    for caps in stamps.iter().rev() {
        let stamp = caps.get(0).unwrap();
        let links: Vec<_> = USER_LINK.captures_iter(&line[..stamp.start()]).collect();
        let Some(last) = links.last() else { continue };
        let author = canonical_username(last.get(1).unwrap().as_str());
        if author.is_empty() {
            continue;
        }
        // Walk back over the author's adjacent links, e.g. the user-page link
        // in front of the talk-page link of a default signature.
        let mut start = last.get(0).unwrap().start();
        for link in links.iter().rev().skip(1) {
            let whole = link.get(0).unwrap();
            let same_author = canonical_username(link.get(1).unwrap().as_str()) == author;
            if !same_author || start - whole.end() > MAX_SIGNATURE_GAP {
                break;
            }
            start = whole.start();
        }
        return Some(Signature {
            author,
            posted_at: parse_stamp(caps),
            start,
            end: stamp.end(),
        });
    }
    None
}

fn canonical_username(raw: &str) -> String {
    let name = raw.replace('_', " ");
    let name = name.trim();
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn parse_stamp(caps: &regex::Captures<'_>) -> Option<DateTime<Utc>> {
    let num = |i: usize| caps.get(i).unwrap().as_str().parse::<u32>().ok();
    let month = match caps.get(4).unwrap().as_str() {
        "January" => 1,
        "February" => 2,
        "March" => 3,
        "April" => 4,
        "May" => 5,
        "June" => 6,
        "July" => 7,
        "August" => 8,
        "September" => 9,
        "October" => 10,
        "November" => 11,
        _ => 12,
    };
    let date = NaiveDate::from_ymd_opt(num(5)? as i32, month, num(3)?)?;
    let time = NaiveTime::from_hms_opt(num(1)?, num(2)?, 0)?;
    Some(date.and_time(time).and_utc())
}
