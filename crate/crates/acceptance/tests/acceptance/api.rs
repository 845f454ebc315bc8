#[path = "../../../server/tests/support/mod.rs"]
mod support;

use std::collections::BTreeSet;

use crate::Outcome;

const ENDPOINTS: [&str; 6] = [
    "GET /api/ranking",
    "GET /api/conversations/{id}",
    "GET /api/conversations/{id}/history",
    "POST /api/watches",
    "GET /api/alerts",
    "GET /api/health",
];

pub fn check() -> Outcome {
    let exchanges = support::load_exchanges();
    let covered: BTreeSet<&str> = exchanges.iter().map(|e| e.endpoint.as_str()).collect();
    let mut required: Vec<&str> = ENDPOINTS.to_vec();
    required.push("DELETE /api/watches/{id}");
    if let Some(missing) = required.iter().find(|e| !covered.contains(*e)) {
        return Err(format!("no recording for {missing}"));
    }
    let status_of = |name: &str| {
        exchanges
            .iter()
            .find(|e| e.name == name)
            .and_then(|e| e.response.as_ref())
            .map(|r| r.status)
    };
    if status_of("ranking without token") != Some(401) || status_of("unknown conversation") != Some(404) {
        return Err("recordings lack the 401 or 404 cases".into());
    }
    let problems = support::check_recordings();
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }
    Ok(format!("{} recorded exchanges over all endpoints match the live service", exchanges.len()))
}
