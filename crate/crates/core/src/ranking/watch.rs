use std::collections::HashSet;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::forecast::ForecastPoint;
use crate::ids::stable_id;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WatchError {
    #[error("alert_threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("empty moderator or conversation id")]
    EmptyId,
}

/// A moderator's threshold subscription on one conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatchItem {
    pub watch_id: String,
    pub moderator_id: String,
    pub conversation_id: String,
    pub alert_threshold: f64,
    pub created_at: DateTime<Utc>,
}

impl WatchItem {
    pub fn new(
        moderator_id: &str,
        conversation_id: &str,
        alert_threshold: f64,
        created_at: DateTime<Utc>,
    ) -> Result<Self, WatchError> {
        let watch_id = stable_id(&[
            moderator_id,
            conversation_id,
            &created_at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        ]);
        let item = WatchItem {
            watch_id,
            moderator_id: moderator_id.to_string(),
            conversation_id: conversation_id.to_string(),
            alert_threshold,
            created_at,
        };
        item.validate()?;
        Ok(item)
    }

    pub fn validate(&self) -> Result<(), WatchError> {
        if !(0.0..=1.0).contains(&self.alert_threshold) {
            return Err(WatchError::InvalidThreshold(self.alert_threshold));
        }
        if self.moderator_id.is_empty() || self.conversation_id.is_empty() || self.watch_id.is_empty() {
            return Err(WatchError::EmptyId);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub alert_id: String,
    pub watch_id: String,
    pub conversation_id: String,
    pub triggering_after_ordinal: u32,
    pub score_at_trigger: f64,
    pub emitted_at: DateTime<Utc>,
}

impl AlertEvent {
    pub fn id_for(watch_id: &str, after_ordinal: u32) -> String {
        stable_id(&[watch_id, &after_ordinal.to_string()])
    }
}

/// Alerts for every watch on the point's conversation whose threshold the
/// point reaches, skipping `(watch, ordinal)` pairs already in `emitted`.
pub fn evaluate_watches<'a>(
    watches: impl IntoIterator<Item = &'a WatchItem>,
    point: &ForecastPoint,
    emitted: &HashSet<String>,
    now: DateTime<Utc>,
) -> Vec<AlertEvent> {
    let mut seen = HashSet::new();
    watches
        .into_iter()
        .filter(|w| w.conversation_id == point.conversation_id && w.alert_threshold <= point.score)
        .filter_map(|w| {
            let alert_id = AlertEvent::id_for(&w.watch_id, point.after_ordinal);
            if emitted.contains(&alert_id) || !seen.insert(alert_id.clone()) {
                return None;
            }
            Some(AlertEvent {
                alert_id,
                watch_id: w.watch_id.clone(),
                conversation_id: point.conversation_id.clone(),
                triggering_after_ordinal: point.after_ordinal,
                score_at_trigger: point.score,
                emitted_at: now,
            })
        })
        .collect()
}
