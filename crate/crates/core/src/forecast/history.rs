use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ForecastError;

/// Decimal places kept for persisted scores.
pub const SCORE_DECIMALS: i32 = 6;

pub fn round_score(score: f64) -> f64 {
    let scale = 10f64.powi(SCORE_DECIMALS);
    (score * scale).round() / scale
}

/// Risk score for the prefix `c_1..c_k` of one conversation, `k = after_ordinal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub conversation_id: String,
    pub after_ordinal: u32,
    pub score: f64,
    pub scorer_id: String,
    pub computed_at: DateTime<Utc>,
}

impl ForecastPoint {
    /// Validates the ranges and rounds the score to the stored precision.
    pub fn new(
        conversation_id: impl Into<String>,
        after_ordinal: u32,
        score: f64,
        scorer_id: impl Into<String>,
        computed_at: DateTime<Utc>,
    ) -> Result<Self, ForecastError> {
        let point = ForecastPoint {
            conversation_id: conversation_id.into(),
            after_ordinal,
            score: round_score(score),
            scorer_id: scorer_id.into(),
            computed_at,
        };
        point.validate()?;
        Ok(point)
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(ForecastError::InvalidPoint(format!("score {} outside [0, 1]", self.score)));
        }
        if self.after_ordinal == 0 {
            return Err(ForecastError::InvalidPoint("after_ordinal must be at least 1".into()));
        }
        if self.conversation_id.is_empty() || self.scorer_id.is_empty() {
            return Err(ForecastError::InvalidPoint("empty conversation_id or scorer_id".into()));
        }
        Ok(())
    }
}

/// Append-only forecast sequence of one conversation. `after_ordinal` of the
/// i-th point is always `i + 1` and all points share one scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHistory")]
pub struct ForecastHistory {
    conversation_id: String,
    points: Vec<ForecastPoint>,
}

#[derive(Deserialize)]
struct RawHistory {
    conversation_id: String,
    points: Vec<ForecastPoint>,
}

impl TryFrom<RawHistory> for ForecastHistory {
    type Error = ForecastError;

    fn try_from(raw: RawHistory) -> Result<Self, Self::Error> {
        let mut history = ForecastHistory::new(raw.conversation_id);
        for point in raw.points {
            history.append(point)?;
        }
        Ok(history)
    }
}

impl ForecastHistory {
    pub fn new(conversation_id: impl Into<String>) -> Self {
        ForecastHistory { conversation_id: conversation_id.into(), points: Vec::new() }
    }

    pub fn conversation_id(&self) -> &str {
        &self.conversation_id
    }

    pub fn points(&self) -> &[ForecastPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn latest(&self) -> Option<&ForecastPoint> {
        self.points.last()
    }

    /// The point scored on prefix `c_1..c_k`.
    pub fn at(&self, k: u32) -> Option<&ForecastPoint> {
        (k as usize).checked_sub(1).and_then(|i| self.points.get(i))
    }

    pub fn scorer_id(&self) -> Option<&str> {
        self.points.first().map(|p| p.scorer_id.as_str())
    }

    /// Checks that `point` would be a valid next append without mutating.
    pub fn check_next(&self, point: &ForecastPoint) -> Result<(), ForecastError> {
        point.validate()?;
        if point.conversation_id != self.conversation_id {
            return Err(ForecastError::History(format!(
                "point for {} appended to history of {}",
                point.conversation_id, self.conversation_id
            )));
        }
        let expected = self.points.len() as u32 + 1;
        if point.after_ordinal != expected {
            return Err(ForecastError::History(format!(
                "expected after_ordinal {expected}, got {}",
                point.after_ordinal
            )));
        }
        if let Some(id) = self.scorer_id() {
            if id != point.scorer_id {
                return Err(ForecastError::History(format!(
                    "history scored by {id}, point by {}",
                    point.scorer_id
                )));
            }
        }
        Ok(())
    }

    pub fn append(&mut self, point: ForecastPoint) -> Result<(), ForecastError> {
        self.check_next(&point)?;
        self.points.push(point);
        Ok(())
    }
}
