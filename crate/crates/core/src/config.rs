//! TOML configuration shared by the monitor service and the replay tool.
//!
//! Every key is optional:
//!
//! ```toml
//! api_url = "https://en.wikipedia.org/w/api.php"
//! poll_interval_secs = 60
//! pages = ["Talk:Joe_Biden", { title = "Talk:Kim_Jong-un", poll_interval_secs = 120 }]
//! store_path = "talkwatch.log"
//!
//! [scorer]
//! kind = "builtin-baseline"
//!
//! [ranking]
//! staleness_hours = 72
//! risk = { elevated = 0.4, high = 0.65 }
//! trend = { small = 0.05, large = 0.15 }
//!
//! [server]
//! bind = "127.0.0.1:8080"
//! tokens = [{ token = "s3cret", principal = "alice" }]
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::forecast::{ForecastError, ScorerDescriptor, ScorerKind};
use crate::ingest::{PageConfig, DEFAULT_API_URL, DEFAULT_PAGES, DEFAULT_POLL_INTERVAL, DEFAULT_REQUEST_TIMEOUT};
use crate::ranking::{RankingConfig, RiskThresholds, TrendThresholds, DEFAULT_STALENESS};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PageEntry {
    Title(String),
    Table {
        title: String,
        poll_interval_secs: Option<u64>,
        #[serde(default = "yes")]
        enabled: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingSection {
    pub staleness_hours: f64,
    pub risk: RiskThresholds,
    pub trend: TrendThresholds,
}

impl Default for RankingSection {
    fn default() -> Self {
        RankingSection {
            staleness_hours: DEFAULT_STALENESS.as_secs_f64() / 3600.0,
            risk: RiskThresholds::default(),
            trend: TrendThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub principal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub bind: String,
    pub tokens: Vec<TokenEntry>,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection { bind: "127.0.0.1:8080".into(), tokens: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub api_url: String,
    pub user_agent: Option<String>,
    pub request_timeout_secs: u64,
    pub poll_interval_secs: u64,
    /// Empty means the built-in list of high-traffic talk pages.
    pub pages: Vec<PageEntry>,
    pub store_path: PathBuf,
    /// Write a compacted snapshot after this many appended events; 0 disables.
    pub compact_every: u64,
    pub scorer: ScorerKind,
    pub ranking: RankingSection,
    pub server: ServerSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            api_url: DEFAULT_API_URL.into(),
            user_agent: None,
            request_timeout_secs: DEFAULT_REQUEST_TIMEOUT.as_secs(),
            poll_interval_secs: DEFAULT_POLL_INTERVAL.as_secs(),
            pages: Vec::new(),
            store_path: PathBuf::from("talkwatch.log"),
            compact_every: 1000,
            scorer: ScorerKind::default(),
            ranking: RankingSection::default(),
            server: ServerSection::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.page_configs()?;
        self.ranking_config()?;
        self.scorer_descriptor().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.request_timeout_secs == 0 {
            return Err(ConfigError::Invalid("request_timeout_secs must be positive".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.server.tokens {
            if t.token.is_empty() || t.principal.is_empty() {
                return Err(ConfigError::Invalid("server tokens need a token and a principal".into()));
            }
            if !seen.insert(&t.token) {
                return Err(ConfigError::Invalid("duplicate server token".into()));
            }
        }
        Ok(())
    }

    pub fn page_configs(&self) -> Result<Vec<PageConfig>, ConfigError> {
        let default_interval = Duration::from_secs(self.poll_interval_secs);
        let entries: Vec<PageEntry> = if self.pages.is_empty() {
            DEFAULT_PAGES.iter().map(|p| PageEntry::Title(p.to_string())).collect()
        } else {
            self.pages.clone()
        };
        let mut out: Vec<PageConfig> = Vec::new();
        for entry in entries {
            let config = match entry {
                PageEntry::Title(title) => PageConfig::new(title, default_interval, true),
                PageEntry::Table { title, poll_interval_secs, enabled } => PageConfig::new(
                    title,
                    poll_interval_secs.map_or(default_interval, Duration::from_secs),
                    enabled,
                ),
            }
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if out.iter().any(|c| c.page_title == config.page_title) {
                return Err(ConfigError::Invalid(format!("page {} listed twice", config.page_title)));
            }
            out.push(config);
        }
        Ok(out)
    }

    pub fn ranking_config(&self) -> Result<RankingConfig, ConfigError> {
        let hours = self.ranking.staleness_hours;
        if !(hours.is_finite() && hours > 0.0) {
            return Err(ConfigError::Invalid(format!("staleness_hours must be positive, got {hours}")));
        }
        Ok(RankingConfig {
            risk: self.ranking.risk,
            trend: self.ranking.trend,
            staleness: Duration::from_secs_f64(hours * 3600.0),
        })
    }

    pub fn scorer_descriptor(&self) -> Result<ScorerDescriptor, ForecastError> {
        ScorerDescriptor::new(self.scorer.clone())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.page_configs().unwrap().len(), DEFAULT_PAGES.len());
        assert_eq!(c.ranking_config().unwrap(), RankingConfig::default());
    }

    #[test]
    fn full_example() {
        let text = r#"
            poll_interval_secs = 30
            pages = ["Talk:A", { title = "Talk:B", poll_interval_secs = 120, enabled = false }]
            [scorer]
            kind = "builtin-baseline"
            weights = { bias = -1.5 }
            [ranking]
            staleness_hours = 24
            risk = { elevated = 0.3, high = 0.8 }
            [server]
            tokens = [{ token = "t", principal = "alice" }]
        "#;
        let c = Config::from_toml_str(text).unwrap();
        let pages = c.page_configs().unwrap();
        assert_eq!(pages[0].poll_interval, Duration::from_secs(30));
        assert_eq!(pages[1].poll_interval, Duration::from_secs(120));
        assert!(!pages[1].enabled);
        assert_eq!(c.ranking_config().unwrap().staleness, Duration::from_secs(24 * 3600));
        assert_eq!(c.ranking.risk.high(), 0.8);
        match c.scorer {
            ScorerKind::BuiltinBaseline { weights } => assert_eq!((weights.bias, weights.second_person), (-1.5, 3.0)),
            _ => panic!(),
        }
    }

    #[test]
    fn bad_thresholds_fail_at_startup() {
        let err = Config::from_toml_str("[ranking]\nrisk = { elevated = 0.7, high = 0.4 }").unwrap_err();
        assert!(err.to_string().contains("0 < elevated < high < 1"), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml_str("pages = [\"Barack_Obama\"]").is_err());
        assert!(Config::from_toml_str("pages = [\"Talk:A\", \"Talk:A\"]").is_err());
        assert!(Config::from_toml_str("poll_interval_secs = 1\npages = [\"Talk:A\"]").is_err());
        assert!(Config::from_toml_str("unknown_key = 1").is_err());
        assert!(Config::from_toml_str("[scorer]\nkind = \"builtin-baseline\"\nweights = { caps_ratio = -2.0 }").is_err());
        assert!(Config::from_toml_str("[server]\ntokens = [{ token = \"a\", principal = \"x\" }, { token = \"a\", principal = \"y\" }]").is_err());
    }
}
