//! Live ranking of conversations by latest forecast, plus moderator watches.

mod watch;

use std::cmp::Ordering;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::forecast::{round_score, ForecastHistory};
use crate::parser::ConversationRecord;

pub use watch::{evaluate_watches, AlertEvent, WatchError, WatchItem};

pub const DEFAULT_STALENESS: Duration = Duration::from_secs(72 * 3600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskBucket {
    Low,
    Elevated,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendBucket {
    Flat,
    RisingSmall,
    RisingLarge,
    FallingSmall,
    FallingLarge,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid ranking configuration: {0}")]
pub struct RankingConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRisk")]
pub struct RiskThresholds {
    elevated: f64,
    high: f64,
}

#[derive(Deserialize)]
struct RawRisk {
    elevated: f64,
    high: f64,
}

impl TryFrom<RawRisk> for RiskThresholds {
    type Error = RankingConfigError;

    fn try_from(raw: RawRisk) -> Result<Self, Self::Error> {
        RiskThresholds::new(raw.elevated, raw.high)
    }
}

impl RiskThresholds {
    /// Requires `0 < elevated < high < 1`.
    pub fn new(elevated: f64, high: f64) -> Result<Self, RankingConfigError> {
        if !(0.0 < elevated && elevated < high && high < 1.0) {
            return Err(RankingConfigError(format!(
                "risk thresholds must satisfy 0 < elevated < high < 1, got ({elevated}, {high})"
            )));
        }
        Ok(RiskThresholds { elevated, high })
    }

    pub fn elevated(&self) -> f64 {
        self.elevated
    }

    pub fn high(&self) -> f64 {
        self.high
    }
}

impl Default for RiskThresholds {
    fn default() -> Self {
        RiskThresholds { elevated: 0.4, high: 0.65 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrend")]
pub struct TrendThresholds {
    small: f64,
    large: f64,
}

#[derive(Deserialize)]
struct RawTrend {
    small: f64,
    large: f64,
}

impl TryFrom<RawTrend> for TrendThresholds {
    type Error = RankingConfigError;

    fn try_from(raw: RawTrend) -> Result<Self, Self::Error> {
        TrendThresholds::new(raw.small, raw.large)
    }
}

impl TrendThresholds {
    /// Requires `0 < small < large <= 1`.
    pub fn new(small: f64, large: f64) -> Result<Self, RankingConfigError> {
        if !(0.0 < small && small < large && large <= 1.0) {
            return Err(RankingConfigError(format!(
                "trend thresholds must satisfy 0 < small < large <= 1, got ({small}, {large})"
            )));
        }
        Ok(TrendThresholds { small, large })
    }

    pub fn small(&self) -> f64 {
        self.small
    }

    pub fn large(&self) -> f64 {
        self.large
    }
}

impl Default for TrendThresholds {
    fn default() -> Self {
        TrendThresholds { small: 0.05, large: 0.15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingConfig {
    pub risk: RiskThresholds,
    pub trend: TrendThresholds,
    pub staleness: Duration,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            risk: RiskThresholds::default(),
            trend: TrendThresholds::default(),
            staleness: DEFAULT_STALENESS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub conversation_id: String,
    pub page_title: String,
    pub heading: String,
    pub latest_score: f64,
    pub score_delta: f64,
    pub trend_bucket: TrendBucket,
    pub risk_bucket: RiskBucket,
    pub comment_count: usize,
    /// Whole seconds since the conversation's last activity.
    pub age: i64,
    pub is_live: bool,
}

/// A ranking as served over HTTP and written by fixture sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingPage {
    pub generated_at: DateTime<Utc>,
    pub entries: Vec<RankingEntry>,
}

pub fn assign_risk_bucket(score: f64, thresholds: &RiskThresholds) -> RiskBucket {
    if score < thresholds.elevated {
        RiskBucket::Low
    } else if score < thresholds.high {
        RiskBucket::Elevated
    } else {
        RiskBucket::High
    }
}

/// Bucket a score change. The delta is compared at the stored score
/// precision so that e.g. `0.50 - 0.45` lands exactly on the 0.05 boundary.
pub fn trend_bucket(delta: f64, thresholds: &TrendThresholds) -> TrendBucket {
    let delta = round_score(delta);
    let magnitude = delta.abs();
    if magnitude < thresholds.small {
        TrendBucket::Flat
    } else if magnitude < thresholds.large {
        if delta > 0.0 { TrendBucket::RisingSmall } else { TrendBucket::FallingSmall }
    } else if delta > 0.0 {
        TrendBucket::RisingLarge
    } else {
        TrendBucket::FallingLarge
    }
}

/// Latest change in score and its bucket; a single point counts as flat.
pub fn compute_trend(history: &ForecastHistory, thresholds: &TrendThresholds) -> (f64, TrendBucket) {
    let points = history.points();
    let delta = match points {
        [.., prev, last] => round_score(last.score - prev.score),
        _ => 0.0,
    };
    (delta, trend_bucket(delta, thresholds))
}

/// Whether `conversation` belongs in the live ranking at `now`.
pub fn is_rankable(conversation: &ConversationRecord, now: DateTime<Utc>, staleness: Duration) -> bool {
    let Some(last) = conversation.last_activity else { return false };
    let window = chrono::Duration::from_std(staleness).unwrap_or(chrono::Duration::MAX);
    conversation.is_live && now.signed_duration_since(last) <= window
}

/// Live conversations with a non-empty history, highest latest score first.
/// Ties go to the more recently active conversation, then the smaller id.
pub fn build_ranking<'a>(
    items: impl IntoIterator<Item = (&'a ConversationRecord, &'a ForecastHistory)>,
    now: DateTime<Utc>,
    config: &RankingConfig,
) -> Vec<RankingEntry> {
    let mut ranked: Vec<(DateTime<Utc>, RankingEntry)> = items
        .into_iter()
        .filter(|(c, h)| !h.is_empty() && is_rankable(c, now, config.staleness))
        .map(|(c, h)| {
            let last = c.last_activity.expect("rankable conversations have activity");
            let latest = h.latest().expect("non-empty").score;
            let (delta, trend) = compute_trend(h, &config.trend);
            let entry = RankingEntry {
                conversation_id: c.conversation_id.clone(),
                page_title: c.page_title.clone(),
                heading: c.heading.clone(),
                latest_score: latest,
                score_delta: delta,
                trend_bucket: trend,
                risk_bucket: assign_risk_bucket(latest, &config.risk),
                comment_count: c.comment_count(),
                age: now.signed_duration_since(last).num_seconds().max(0),
                is_live: c.is_live,
            };
            (last, entry)
        })
        .collect();
    ranked.sort_by(|(ta, a), (tb, b)| ranking_order(a.latest_score, *ta, &a.conversation_id, b.latest_score, *tb, &b.conversation_id));
    ranked.into_iter().map(|(_, e)| e).collect()
}

fn ranking_order(
    score_a: f64,
    last_a: DateTime<Utc>,
    id_a: &str,
    score_b: f64,
    last_b: DateTime<Utc>,
    id_b: &str,
) -> Ordering {
    score_b
        .total_cmp(&score_a)
        .then(last_b.cmp(&last_a))
        .then_with(|| id_a.cmp(id_b))
}
