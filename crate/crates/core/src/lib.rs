//! Live monitoring of Wikipedia Talk-Page discussions with per-comment
//! derailment forecasts.
//!
//! The pipeline is split the same way the data flows:
//!
//! * [`ingest`] polls revisions and turns them into line deltas,
//! * [`parser`] threads wikitext into conversations and detects new comments,
//! * [`forecast`] keeps one risk score per conversation prefix,
//! * [`ranking`] orders live conversations and evaluates moderator watches,
//! * [`store`] persists everything as an append-only event log,
//! * [`pipeline`] wires the pieces into a tick-driven monitor.

pub mod config;
pub mod forecast;
pub mod ids;
pub mod ingest;
pub mod parser;
pub mod pipeline;
pub mod ranking;
pub mod store;
pub mod stub;

pub use config::Config;
pub use forecast::{ForecastHistory, ForecastPoint, Scorer, ScorerDescriptor};
pub use parser::{CommentRecord, ConversationRecord, NewCommentEvent};
pub use ranking::{RankingEntry, RiskBucket, TrendBucket};
pub use store::{Store, StoreState};
