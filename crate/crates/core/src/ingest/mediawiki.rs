use std::collections::HashMap;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Deserialize;
use tracing::warn;

use super::{IngestError, RevisionSnapshot, RevisionSource};

pub const DEFAULT_API_URL: &str = "https://en.wikipedia.org/w/api.php";
pub const DEFAULT_REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

pub const DEFAULT_USER_AGENT: &str =
    concat!("talkwatch/", env!("CARGO_PKG_VERSION"), " (read-only talk page monitor)");

/// Read-only client for the MediaWiki Action API revision query.
#[derive(Debug)]
pub struct MediaWikiClient {
    api_url: String,
    agent: ureq::Agent,
    /// Highest revision handed out per page; lower ones are rejected as stale.
    seen: HashMap<String, u64>,
}

impl MediaWikiClient {
    pub fn new(api_url: impl Into<String>, user_agent: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .user_agent(user_agent)
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        MediaWikiClient {
            api_url: api_url.into(),
            agent: config.into(),
            seen: HashMap::new(),
        }
    }

    /// Newest revision of `page_title`, with the monotonicity guard applied.
    pub fn fetch_latest_revision(&mut self, page_title: &str) -> Result<RevisionSnapshot, IngestError> {
        let snapshot = self.query_latest(page_title)?;
        if let Some(&seen) = self.seen.get(page_title) {
            if snapshot.revision_id < seen {
                return Err(IngestError::StaleRevision {
                    page: page_title.to_string(),
                    got: snapshot.revision_id,
                    seen,
                });
            }
        }
        self.seen.insert(page_title.to_string(), snapshot.revision_id);
        Ok(snapshot)
    }

    fn query_latest(&self, page_title: &str) -> Result<RevisionSnapshot, IngestError> {
        let transport = |message: String| IngestError::Transport {
            page: page_title.to_string(),
            message,
        };
        let protocol = |message: String| IngestError::Protocol {
            page: page_title.to_string(),
            message,
        };
        let response = self
            .agent
            .get(&self.api_url)
            .query("action", "query")
            .query("prop", "revisions")
            .query("titles", page_title)
            .query("rvprop", "ids|timestamp|content")
            .query("rvslots", "main")
            .query("rvlimit", "1")
            .query("formatversion", "2")
            .query("format", "json")
            .call()
            .map_err(|e| transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .into_body()
            .read_to_string()
            .map_err(|e| transport(e.to_string()))?;
        if status >= 500 || status == 429 {
            return Err(transport(format!("HTTP {status}")));
        }
        if status != 200 {
            return Err(protocol(format!("HTTP {status}")));
        }
        let fetched_at = Utc::now();
        parse_revision_response(page_title, &body, fetched_at)
    }
}

impl RevisionSource for MediaWikiClient {
    fn fetch_latest(&mut self, page_title: &str) -> Result<RevisionSnapshot, IngestError> {
        self.fetch_latest_revision(page_title)
    }
}

#[derive(Deserialize)]
struct ApiResponse {
    error: Option<ApiError>,
    query: Option<Query>,
}

#[derive(Deserialize)]
struct ApiError {
    code: String,
    #[serde(default)]
    info: String,
}

#[derive(Deserialize)]
struct Query {
    pages: Vec<Page>,
}

#[derive(Deserialize)]
struct Page {
    #[serde(default)]
    missing: bool,
    #[serde(default)]
    invalid: bool,
    #[serde(default)]
    revisions: Vec<Revision>,
}

#[derive(Deserialize)]
struct Revision {
    revid: u64,
    timestamp: DateTime<Utc>,
    slots: Slots,
}

#[derive(Deserialize)]
struct Slots {
    main: Slot,
}

#[derive(Deserialize)]
struct Slot {
    content: Option<String>,
    #[serde(default)]
    texthidden: bool,
}

/// Decode a `formatversion=2` revision query response.
pub(crate) fn parse_revision_response(
    page_title: &str,
    body: &str,
    fetched_at: DateTime<Utc>,
) -> Result<RevisionSnapshot, IngestError> {
    let protocol = |message: String| IngestError::Protocol {
        page: page_title.to_string(),
        message,
    };
    let parsed: ApiResponse =
        serde_json::from_str(body).map_err(|e| protocol(format!("bad JSON: {e}")))?;
    if let Some(err) = parsed.error {
        return Err(protocol(format!("{}: {}", err.code, err.info)));
    }
    let page = parsed
        .query
        .and_then(|q| q.pages.into_iter().next())
        .ok_or_else(|| protocol("no pages in response".into()))?;
    if page.missing || page.invalid {
        warn!(page = page_title, "page is missing upstream");
        return Err(IngestError::PageGone(page_title.to_string()));
    }
    let rev = page
        .revisions
        .into_iter()
        .next()
        .ok_or_else(|| protocol("page has no revisions".into()))?;
    if rev.slots.main.texthidden {
        return Err(protocol(format!("content of revision {} is hidden", rev.revid)));
    }
    let wikitext = rev
        .slots
        .main
        .content
        .ok_or_else(|| protocol("revision has no content".into()))?;
    Ok(RevisionSnapshot {
        page_title: page_title.to_string(),
        revision_id: rev.revid,
        wikitext,
        fetched_at,
        revision_time: rev.timestamp,
    })
}
