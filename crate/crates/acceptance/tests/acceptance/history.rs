use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use talkwatch::forecast::{on_new_comment, round_score, ScoreError, Scorer};
use talkwatch::{CommentRecord, ConversationRecord, ForecastHistory, ForecastPoint, NewCommentEvent};

use crate::{run_cases, Outcome};

const CASES: u32 = 1000;

/// Deterministic score from the prefix texts.
struct Digest;

impl Scorer for Digest {
    fn scorer_id(&self) -> &str {
        "digest"
    }

    fn score(&self, _c: &ConversationRecord, prefix: &[CommentRecord]) -> Result<f64, ScoreError> {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in prefix.iter().flat_map(|c| c.text.bytes()) {
            h = (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3);
        }
        Ok((h % 100_001) as f64 / 100_000.0)
    }
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 1, 0, 0, 0).unwrap()
}

fn conversation(words: &[u8]) -> ConversationRecord {
    let comments: Vec<CommentRecord> = words
        .iter()
        .enumerate()
        .map(|(i, w)| CommentRecord {
            comment_id: format!("c{i}"),
            author: format!("U{}", i % 3),
            posted_at: Some(t0() + Duration::minutes(i as i64)),
            text: format!("comment {i} word {w}"),
            indent_depth: 0,
            parent_comment_id: None,
            ordinal: i as u32 + 1,
        })
        .collect();
    ConversationRecord {
        conversation_id: "conv".into(),
        page_title: "Talk:P".into(),
        heading: "H".into(),
        last_activity: comments.last().and_then(|c| c.posted_at),
        comments,
        is_live: true,
    }
}

fn prefix_of(conv: &ConversationRecord, k: usize) -> ConversationRecord {
    let mut p = conv.clone();
    p.comments.truncate(k);
    p.last_activity = p.comments.last().and_then(|c| c.posted_at);
    p
}

fn event(conv: &ConversationRecord, k: usize) -> NewCommentEvent {
    NewCommentEvent { conversation_id: conv.conversation_id.clone(), comment: conv.comments[k - 1].clone(), page_revision_id: k as u64 }
}

/// Comment words, which events arrive (the last always does) and which
/// arrivals are delivered twice.
fn arrivals() -> impl Strategy<Value = (Vec<u8>, Vec<bool>, Vec<bool>)> {
    (1usize..30).prop_flat_map(|n| {
        (
            proptest::collection::vec(any::<u8>(), n),
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(prop::bool::weighted(0.2), n),
        )
    })
}

/// Feed the delivered events online and return every intermediate history.
fn feed(conv: &ConversationRecord, delivered: &[bool], twice: &[bool]) -> Result<Vec<ForecastHistory>, TestCaseError> {
    let n = conv.comments.len();
    let mut history = ForecastHistory::new(&conv.conversation_id);
    let mut seen = vec![history.clone()];
    for k in 1..=n {
        if !(delivered[k - 1] || k == n) {
            continue;
        }
        let repeats = if twice[k - 1] { 2 } else { 1 };
        for _ in 0..repeats {
            let at = t0() + Duration::hours(k as i64);
            history = on_new_comment(&history, &prefix_of(conv, k), &event(conv, k), &Digest, at)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            seen.push(history.clone());
        }
    }
    Ok(seen)
}

pub fn check() -> Outcome {
    run_cases(CASES, arrivals(), |(words, delivered, twice)| {
        let conv = conversation(&words);
        let seen = feed(&conv, &delivered, &twice)?;
        let last = seen.last().unwrap();
        let ordinals: Vec<u32> = last.points().iter().map(|p| p.after_ordinal).collect();
        prop_assert_eq!(ordinals, (1..=conv.comments.len() as u32).collect::<Vec<_>>());
        Ok(())
    })
    .map_err(|e| format!("one point per prefix under gaps: {e}"))?;

    run_cases(CASES, arrivals(), |(words, delivered, twice)| {
        let conv = conversation(&words);
        let seen = feed(&conv, &delivered, &twice)?;
        for pair in seen.windows(2) {
            let (old, new) = (pair[0].points(), pair[1].points());
            prop_assert!(new.len() >= old.len());
            prop_assert_eq!(&new[..old.len()], old);
        }
        let mut last = seen.last().unwrap().clone();
        let before = last.clone();
        let n = last.len() as u32;
        for bad in [
            ForecastPoint::new("conv", n, 0.5, "digest", t0()),
            ForecastPoint::new("conv", n + 2, 0.5, "digest", t0()),
            ForecastPoint::new("conv", n + 1, 0.5, "other", t0()),
        ] {
            prop_assert!(last.append(bad.unwrap()).is_err());
        }
        prop_assert_eq!(last, before);
        Ok(())
    })
    .map_err(|e| format!("append-only: {e}"))?;

    run_cases(CASES, arrivals(), |(words, delivered, twice)| {
        let conv = conversation(&words);
        let online = feed(&conv, &delivered, &twice)?.pop().unwrap();
        let all = vec![true; words.len()];
        let in_order = feed(&conv, &all, &vec![false; words.len()])?.pop().unwrap();
        let offline: Vec<f64> = (1..=conv.comments.len())
            .map(|k| round_score(Digest.score(&conv, &conv.comments[..k]).unwrap()))
            .collect();
        let scores = |h: &ForecastHistory| h.points().iter().map(|p| p.score).collect::<Vec<_>>();
        prop_assert_eq!(&scores(&online), &offline);
        prop_assert_eq!(scores(&in_order), offline);
        Ok(())
    })
    .map_err(|e| format!("online/offline equivalence: {e}"))?;

    Ok(format!(
        "{CASES} cases each: one point per prefix under gaps, append-only, online equals offline"
    ))
}
