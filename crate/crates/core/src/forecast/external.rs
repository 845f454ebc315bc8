//! HTTP adapter for a remote forecasting model.
//!
//! Wire format: `POST <endpoint>` with
//! `{"comments": [{"author", "timestamp", "text"}, ...]}` in reply order,
//! answered by `{"score": <number in [0, 1]>}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ForecastError, ScoreError, Scorer};
use crate::parser::{CommentRecord, ConversationRecord};

#[derive(Debug, Serialize)]
pub struct WireComment<'a> {
    pub author: &'a str,
    /// RFC 3339, or null when the signature carried no parseable date.
    pub timestamp: Option<String>,
    pub text: &'a str,
}

#[derive(Debug, Serialize)]
pub struct ScoreRequest<'a> {
    pub comments: Vec<WireComment<'a>>,
}

impl<'a> ScoreRequest<'a> {
    pub fn from_prefix(prefix: &'a [CommentRecord]) -> Self {
        ScoreRequest {
            comments: prefix
                .iter()
                .map(|c| WireComment {
                    author: &c.author,
                    timestamp: c.posted_at.map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
                    text: &c.text,
                })
                .collect(),
        }
    }
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

#[derive(Debug)]
pub struct ExternalScorer {
    id: String,
    endpoint: String,
    agent: ureq::Agent,
}

impl ExternalScorer {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, ForecastError> {
        let endpoint = endpoint.into();
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
            return Err(ForecastError::Config(format!("external scorer endpoint {endpoint:?} is not an http(s) URL")));
        }
        if timeout.is_zero() {
            return Err(ForecastError::Config("external scorer timeout must be positive".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(ExternalScorer { id: format!("external:{endpoint}"), endpoint, agent })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn request(&self, prefix: &[CommentRecord]) -> Result<f64, ScoreError> {
        if prefix.is_empty() {
            return Err(ScoreError::Protocol("empty prefix".into()));
        }
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(ScoreRequest::from_prefix(prefix))
            .map_err(|e| ScoreError::Unavailable(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ScoreError::Unavailable(e.to_string()))?;
        if status >= 500 || status == 429 {
            return Err(ScoreError::Unavailable(format!("HTTP {status}")));
        }
        if status != 200 {
            return Err(ScoreError::Protocol(format!("HTTP {status}: {}", body.trim())));
        }
        let parsed: ScoreResponse =
            serde_json::from_str(&body).map_err(|e| ScoreError::Protocol(format!("malformed response: {e}")))?;
        if !(0.0..=1.0).contains(&parsed.score) {
            return Err(ScoreError::Protocol(format!("score {} outside [0, 1]", parsed.score)));
        }
        Ok(parsed.score)
    }
}

impl Scorer for ExternalScorer {
    fn scorer_id(&self) -> &str {
        &self.id
    }

    fn score(&self, _conversation: &ConversationRecord, prefix: &[CommentRecord]) -> Result<f64, ScoreError> {
        self.request(prefix)
    }
}
