//! Per-prefix risk forecasts behind a pluggable scorer contract.

pub mod baseline;
pub mod external;
mod history;

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::parser::{CommentRecord, ConversationRecord, NewCommentEvent};

pub use baseline::{BaselineScorer, BaselineWeights, FeatureVector, Lexicon};
pub use external::ExternalScorer;
pub use history::{round_score, ForecastHistory, ForecastPoint, SCORE_DECIMALS};

pub const DEFAULT_EXTERNAL_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    #[error("scorer protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForecastError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("invalid scorer configuration: {0}")]
    Config(String),
    #[error("invalid forecast point: {0}")]
    InvalidPoint(String),
    #[error("history invariant violated: {0}")]
    History(String),
    #[error(transparent)]
    Scorer(#[from] ScoreError),
}

impl ForecastError {
    /// True when the failure is transient and the same call may succeed on a
    /// later tick.
    pub fn is_unavailable(&self) -> bool {
        matches!(self, ForecastError::Scorer(ScoreError::Unavailable(_)))
    }
}

/// Maps a conversation prefix to `p(next comment is antisocial)`.
pub trait Scorer: Send + Sync {
    fn scorer_id(&self) -> &str;

    /// `prefix` is the non-empty list `c_1..c_k` of `conversation.comments`.
    fn score(&self, conversation: &ConversationRecord, prefix: &[CommentRecord]) -> Result<f64, ScoreError>;
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn scorer_id(&self) -> &str {
        (**self).scorer_id()
    }

    fn score(&self, conversation: &ConversationRecord, prefix: &[CommentRecord]) -> Result<f64, ScoreError> {
        (**self).score(conversation, prefix)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn scorer_id(&self) -> &str {
        (**self).scorer_id()
    }

    fn score(&self, conversation: &ConversationRecord, prefix: &[CommentRecord]) -> Result<f64, ScoreError> {
        (**self).score(conversation, prefix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScorerKind {
    BuiltinBaseline {
        #[serde(default)]
        weights: BaselineWeights,
    },
    External {
        endpoint: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_timeout_ms() -> u64 {
    DEFAULT_EXTERNAL_TIMEOUT.as_millis() as u64
}

impl Default for ScorerKind {
    fn default() -> Self {
        ScorerKind::BuiltinBaseline { weights: BaselineWeights::default() }
    }
}

/// A configured scorer together with the id its points are stamped with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScorerDescriptor {
    pub scorer_id: String,
    pub kind: ScorerKind,
}

impl ScorerDescriptor {
    pub fn new(kind: ScorerKind) -> Result<Self, ForecastError> {
        let scorer = instantiate(&kind)?;
        Ok(ScorerDescriptor { scorer_id: scorer.scorer_id().to_string(), kind })
    }

    pub fn instantiate(&self) -> Result<Arc<dyn Scorer>, ForecastError> {
        instantiate(&self.kind)
    }
}

fn instantiate(kind: &ScorerKind) -> Result<Arc<dyn Scorer>, ForecastError> {
    Ok(match kind {
        ScorerKind::BuiltinBaseline { weights } => Arc::new(BaselineScorer::new(*weights, Lexicon::bundled())?),
        ScorerKind::External { endpoint, timeout_ms } => {
            Arc::new(ExternalScorer::new(endpoint.clone(), Duration::from_millis(*timeout_ms))?)
        }
    })
}

/// Score the prefix `c_1..c_k`, rejecting values outside `[0, 1]`.
pub fn score_prefix(
    scorer: &dyn Scorer,
    conversation: &ConversationRecord,
    k: usize,
) -> Result<f64, ForecastError> {
    let n = conversation.comments.len();
    if k == 0 || k > n {
        return Err(ForecastError::Usage(format!("prefix length {k} outside 1..={n}")));
    }
    let score = scorer.score(conversation, &conversation.comments[..k])?;
    if !(0.0..=1.0).contains(&score) {
        return Err(ScoreError::Protocol(format!("score {score} outside [0, 1]")).into());
    }
    Ok(score)
}

/// Points needed to bring `history` up to prefix length `upto`, in order.
/// Either every missing prefix is scored or nothing is returned.
pub fn missing_points(
    history: &ForecastHistory,
    conversation: &ConversationRecord,
    upto: u32,
    scorer: &dyn Scorer,
    now: DateTime<Utc>,
) -> Result<Vec<ForecastPoint>, ForecastError> {
    if history.conversation_id() != conversation.conversation_id {
        return Err(ForecastError::Usage(format!(
            "history of {} used with conversation {}",
            history.conversation_id(),
            conversation.conversation_id
        )));
    }
    if let Some(id) = history.scorer_id() {
        if id != scorer.scorer_id() {
            return Err(ForecastError::History(format!("history scored by {id}, not {}", scorer.scorer_id())));
        }
    }
    let from = history.len() as u32 + 1;
    let mut points = Vec::new();
    for k in from..=upto {
        let score = score_prefix(scorer, conversation, k as usize)?;
        points.push(ForecastPoint::new(&conversation.conversation_id, k, score, scorer.scorer_id(), now)?);
    }
    Ok(points)
}

/// Extend `history` to cover the prefix ending at `event.comment`,
/// backfilling any prefixes skipped by collapsed revisions. An event for a
/// prefix that is already scored leaves the history unchanged.
pub fn on_new_comment(
    history: &ForecastHistory,
    conversation: &ConversationRecord,
    event: &NewCommentEvent,
    scorer: &dyn Scorer,
    now: DateTime<Utc>,
) -> Result<ForecastHistory, ForecastError> {
    if event.conversation_id != conversation.conversation_id {
        return Err(ForecastError::Usage(format!(
            "event for {} applied to conversation {}",
            event.conversation_id, conversation.conversation_id
        )));
    }
    let mut next = history.clone();
    for point in missing_points(history, conversation, event.comment.ordinal, scorer, now)? {
        next.append(point)?;
    }
    Ok(next)
}
