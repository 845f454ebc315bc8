//! Offline tools around the monitor: labeled-corpus evaluation and fixture
//! sessions.

pub mod corpus;
pub mod eval;
pub mod session;
