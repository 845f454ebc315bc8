use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use talkwatch::{Config, Store};
use talkwatch_replay::session::run_fixture_session;

use crate::Outcome;

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Hand-counted features of the escalation comments: second-person share,
/// lexicon hits, exclamation marks, shouted-word share.
fn hand_scores() -> [f64; 4] {
    [
        (0.0, 0.0, 0.0, 0.0),
        (2.0 / 8.0, 0.0, 0.0, 0.0),
        (2.0 / 9.0, 0.0, 1.0, 1.0 / 9.0),
        (1.0 / 11.0, 2.0, 4.0, 1.0 / 10.0),
    ]
    .map(|(sp, lex, excl, caps): (f64, f64, f64, f64)| {
        logistic(-2.0 + 3.0 * sp + 1.5 * lex + 0.5 * excl + 2.0 * caps)
    })
}

pub fn check() -> Outcome {
    let base = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../replay/fixtures");
    let started = Instant::now();
    let outcome = run_fixture_session(
        &[base.join("escalation"), base.join("pleasant")],
        &Config::default(),
        Arc::new(Store::in_memory()),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    if elapsed.as_secs_f64() >= 5.0 {
        return Err(format!("session took {elapsed:?}"));
    }
    let entries = &outcome.ranking.entries;
    let top = entries.first().ok_or("empty ranking")?;
    if top.heading != "Infobox photo" || entries.len() != 2 {
        return Err(format!("unexpected ranking {:?}", entries.iter().map(|e| &e.heading).collect::<Vec<_>>()));
    }
    let state = &outcome.state;
    for conv in state.conversations.values() {
        let ordinals: Vec<u32> = state
            .history(&conv.conversation_id)
            .map(|h| h.points().iter().map(|p| p.after_ordinal).collect())
            .unwrap_or_default();
        if ordinals != (1..=conv.comment_count() as u32).collect::<Vec<_>>() {
            return Err(format!("{}: points at {ordinals:?}", conv.heading));
        }
    }
    let history = state.history(&top.conversation_id).ok_or("no history")?;
    let want = hand_scores();
    let got: Vec<f64> = history.points().iter().map(|p| p.score).collect();
    if got.len() != want.len() || got.iter().zip(&want).any(|(g, w)| (g - w).abs() > 1e-6) {
        return Err(format!("scores {got:?}, hand-computed {want:?}"));
    }
    let calm = logistic(-2.0);
    let pleasant = state.history(&entries[1].conversation_id).ok_or("no history")?;
    if pleasant.points().iter().any(|p| (p.score - calm).abs() > 1e-6) {
        return Err("pleasant thread scores differ from hand values".into());
    }
    Ok(format!(
        "escalation ranked first, 7 points for 7 comments, scores within 1e-6 of hand values, {:.0} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}
