//! Forecast quality on a labeled corpus.
//!
//! A derailing conversation counts as caught only if some forecast made
//! strictly before its first antisocial comment reaches the threshold, i.e.
//! a point with `after_ordinal < a` where `a` is that comment's ordinal.
//! Lead time is `a - k` for the earliest such point `k`.

use std::collections::HashMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use talkwatch::forecast::{
    on_new_comment, BaselineScorer, ExternalScorer, ForecastError, ForecastHistory, ScoreError, Scorer,
    DEFAULT_EXTERNAL_TIMEOUT,
};
use talkwatch::{CommentRecord, ConversationRecord, NewCommentEvent};
use thiserror::Error;

use crate::corpus::LabeledConversation;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Usage(String),
    #[error("scoring {conversation_id} failed: {source}")]
    Scoring { conversation_id: String, source: ForecastError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scorer_id: String,
    pub threshold: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Comments between the first alert and the first antisocial comment,
    /// averaged over true positives. Absent without true positives.
    pub mean_lead_time: Option<f64>,
}

impl EvalReport {
    pub const TSV_HEADER: &'static str =
        "scorer_id\tthreshold\ttp\tfp\ttn\tfn\tprecision\trecall\tf1\tmean_lead_time";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.scorer_id,
            self.threshold,
            self.true_positives,
            self.false_positives,
            self.true_negatives,
            self.false_negatives,
            self.precision,
            self.recall,
            self.f1,
            self.mean_lead_time.map_or(String::new(), |l| l.to_string()),
        )
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Score a constant value on every prefix.
#[derive(Debug, Clone)]
pub struct ConstantScorer {
    id: String,
    value: f64,
}

impl ConstantScorer {
    pub fn new(value: f64) -> Result<Self, EvalError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(EvalError::Usage(format!("constant score {value} outside [0, 1]")));
        }
        Ok(ConstantScorer { id: format!("constant:{value}"), value })
    }
}

impl Scorer for ConstantScorer {
    fn scorer_id(&self) -> &str {
        &self.id
    }

    fn score(&self, _c: &ConversationRecord, _p: &[CommentRecord]) -> Result<f64, ScoreError> {
        Ok(self.value)
    }
}

/// Reads the labels: 1.0 on the prefix right before the first antisocial
/// comment, 0.0 everywhere else.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    first_antisocial: HashMap<String, u32>,
}

impl OracleScorer {
    pub fn from_corpus(corpus: &[LabeledConversation]) -> Self {
        let first_antisocial = corpus
            .iter()
            .filter_map(|c| c.first_antisocial().map(|a| (c.conversation.conversation_id.clone(), a)))
            .collect();
        OracleScorer { first_antisocial }
    }
}

impl Scorer for OracleScorer {
    fn scorer_id(&self) -> &str {
        "oracle"
    }

    fn score(&self, conversation: &ConversationRecord, prefix: &[CommentRecord]) -> Result<f64, ScoreError> {
        let hit = self
            .first_antisocial
            .get(&conversation.conversation_id)
            .is_some_and(|&a| prefix.len() as u32 + 1 == a);
        Ok(if hit { 1.0 } else { 0.0 })
    }
}

/// Build a scorer from its command-line name: `baseline`, `oracle`,
/// `constant:<v>` or `external:<url>`.
pub fn scorer_from_name(name: &str, corpus: &[LabeledConversation]) -> Result<Arc<dyn Scorer>, EvalError> {
    if name == "baseline" {
        return Ok(Arc::new(BaselineScorer::bundled()));
    }
    if name == "oracle" {
        return Ok(Arc::new(OracleScorer::from_corpus(corpus)));
    }
    if let Some(v) = name.strip_prefix("constant:") {
        let value: f64 = v.parse().map_err(|_| EvalError::Usage(format!("bad constant score {v:?}")))?;
        return Ok(Arc::new(ConstantScorer::new(value)?));
    }
    if let Some(url) = name.strip_prefix("external:") {
        let scorer = ExternalScorer::new(url, DEFAULT_EXTERNAL_TIMEOUT).map_err(|e| EvalError::Usage(e.to_string()))?;
        return Ok(Arc::new(scorer));
    }
    Err(EvalError::Usage(format!(
        "unknown scorer {name:?}; expected baseline, oracle, constant:<v> or external:<url>"
    )))
}

/// Feed one conversation's comments in order through the online forecaster.
pub fn score_conversation(item: &LabeledConversation, scorer: &dyn Scorer) -> Result<ForecastHistory, EvalError> {
    let conv = &item.conversation;
    let mut history = ForecastHistory::new(&conv.conversation_id);
    for comment in &conv.comments {
        let event = NewCommentEvent {
            conversation_id: conv.conversation_id.clone(),
            comment: comment.clone(),
            page_revision_id: 0,
        };
        // computed_at is pinned so reruns are identical
        let at = comment.posted_at.unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
        history = on_new_comment(&history, conv, &event, scorer, at).map_err(|source| EvalError::Scoring {
            conversation_id: conv.conversation_id.clone(),
            source,
        })?;
    }
    Ok(history)
}

pub fn score_corpus(
    corpus: &[LabeledConversation],
    scorer: &dyn Scorer,
    parallel: bool,
) -> Result<Vec<ForecastHistory>, EvalError> {
    if parallel {
        corpus.par_iter().map(|c| score_conversation(c, scorer)).collect()
    } else {
        corpus.iter().map(|c| score_conversation(c, scorer)).collect()
    }
}

/// Earliest ordinal whose forecast reaches `threshold` within the credited
/// window of `item`.
fn first_alert(item: &LabeledConversation, history: &ForecastHistory, threshold: f64) -> Option<u32> {
    let limit = item.first_antisocial().unwrap_or(u32::MAX);
    history
        .points()
        .iter()
        .take_while(|p| p.after_ordinal < limit)
        .find(|p| p.score >= threshold)
        .map(|p| p.after_ordinal)
}

pub fn evaluate(
    corpus: &[LabeledConversation],
    histories: &[ForecastHistory],
    scorer_id: &str,
    threshold: f64,
) -> Result<EvalReport, EvalError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::Usage(format!("threshold {threshold} outside [0, 1]")));
    }
    if corpus.len() != histories.len() {
        return Err(EvalError::Usage("one history per conversation required".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut lead_total = 0u64;
    for (item, history) in corpus.iter().zip(histories) {
        let alert = first_alert(item, history, threshold);
        match (item.first_antisocial(), alert) {
            (Some(a), Some(k)) => {
                tp += 1;
                lead_total += u64::from(a - k);
            }
            (Some(_), None) => fn_ += 1,
            (None, Some(_)) => fp += 1,
            (None, None) => tn += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(EvalReport {
        scorer_id: scorer_id.to_string(),
        threshold,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        precision,
        recall,
        f1,
        mean_lead_time: (tp > 0).then(|| lead_total as f64 / tp as f64),
    })
}

pub fn replay_corpus(
    corpus: &[LabeledConversation],
    scorer: &dyn Scorer,
    threshold: f64,
) -> Result<EvalReport, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::Usage("corpus is empty".into()));
    }
    let histories = score_corpus(corpus, scorer, false)?;
    evaluate(corpus, &histories, scorer.scorer_id(), threshold)
}

/// Reports at several thresholds from one scoring pass.
pub fn sweep(
    corpus: &[LabeledConversation],
    scorer: &dyn Scorer,
    thresholds: &[f64],
    parallel: bool,
) -> Result<Vec<EvalReport>, EvalError> {
    let histories = score_corpus(corpus, scorer, parallel)?;
    thresholds
        .iter()
        .map(|&t| evaluate(corpus, &histories, scorer.scorer_id(), t))
        .collect()
}
