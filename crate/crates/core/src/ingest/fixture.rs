use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};

use super::{IngestError, RevisionSnapshot, RevisionSource};

pub const META_FILE: &str = "meta.tsv";

/// Recorded revisions replayed from disk, one revision per fetch.
///
/// Layout: `<root>/<page>/meta.tsv` lists `revision_id<TAB>timestamp` rows in
/// fetch order and `<root>/<page>/<revision_id>.wikitext` holds each revision.
/// A directory name without a namespace maps to the `Talk:` namespace.
/// Once a page runs out of revisions it keeps returning the last one.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    pages: BTreeMap<String, FixturePage>,
}

#[derive(Debug, Clone)]
struct FixturePage {
    dir: PathBuf,
    revisions: Vec<(u64, DateTime<Utc>)>,
    cursor: usize,
}

impl FixtureTransport {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, IngestError> {
        let root = root.as_ref();
        let entries = fs::read_dir(root)
            .map_err(|e| IngestError::Fixture(format!("{}: {e}", root.display())))?;
        let mut pages = BTreeMap::new();
        for entry in entries {
            let entry = entry.map_err(|e| IngestError::Fixture(e.to_string()))?;
            let path = entry.path();
            if !path.is_dir() {
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            let title = title_for_dir(&name);
            let revisions = read_meta(&path)?;
            for (rev, _) in &revisions {
                let file = path.join(format!("{rev}.wikitext"));
                if !file.is_file() {
                    return Err(IngestError::Fixture(format!("missing {}", file.display())));
                }
            }
            if pages
                .insert(title.clone(), FixturePage { dir: path, revisions, cursor: 0 })
                .is_some()
            {
                return Err(IngestError::Fixture(format!("duplicate fixture page {title}")));
            }
        }
        Ok(FixtureTransport { pages })
    }

    /// Pages from several fixture roots; a title may appear in only one.
    pub fn open_all<P: AsRef<Path>>(roots: &[P]) -> Result<Self, IngestError> {
        let mut pages = BTreeMap::new();
        for root in roots {
            for (title, page) in Self::open(root)?.pages {
                if pages.insert(title.clone(), page).is_some() {
                    return Err(IngestError::Fixture(format!("duplicate fixture page {title}")));
                }
            }
        }
        Ok(FixtureTransport { pages })
    }

    pub fn page_titles(&self) -> Vec<String> {
        self.pages.keys().cloned().collect()
    }

    pub fn revision_count(&self, page_title: &str) -> usize {
        self.pages.get(page_title).map_or(0, |p| p.revisions.len())
    }

    /// Timestamp of the revision the next fetch will return.
    pub fn next_revision_time(&self, page_title: &str) -> Option<DateTime<Utc>> {
        let page = self.pages.get(page_title)?;
        let idx = page.cursor.min(page.revisions.len().checked_sub(1)?);
        Some(page.revisions[idx].1)
    }

    /// Whether any page still has unread revisions.
    pub fn has_pending(&self) -> bool {
        self.pages.values().any(|p| p.cursor < p.revisions.len())
    }
}

fn title_for_dir(name: &str) -> String {
    if name.contains(':') {
        name.to_string()
    } else {
        format!("Talk:{name}")
    }
}

fn read_meta(dir: &Path) -> Result<Vec<(u64, DateTime<Utc>)>, IngestError> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| IngestError::Fixture(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<(u64, DateTime<Utc>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("revision_id") {
            continue;
        }
        let bad = |what: &str| {
            IngestError::Fixture(format!("{}:{}: {what}", path.display(), lineno + 1))
        };
        let (rev, ts) = line.split_once('\t').ok_or_else(|| bad("expected two tab-separated fields"))?;
        let rev: u64 = rev.trim().parse().map_err(|_| bad("bad revision id"))?;
        let ts = DateTime::parse_from_rfc3339(ts.trim())
            .map_err(|_| bad("bad ISO-8601 timestamp"))?
            .with_timezone(&Utc);
        if let Some((prev, _)) = rows.last() {
            if rev <= *prev {
                return Err(bad("revision ids must strictly increase"));
            }
        }
        rows.push((rev, ts));
    }
    Ok(rows)
}

impl RevisionSource for FixtureTransport {
    fn fetch_latest(&mut self, page_title: &str) -> Result<RevisionSnapshot, IngestError> {
        let page = self
            .pages
            .get_mut(page_title)
            .ok_or_else(|| IngestError::PageGone(page_title.to_string()))?;
        let last = page
            .revisions
            .len()
            .checked_sub(1)
            .ok_or_else(|| IngestError::PageGone(page_title.to_string()))?;
        let (rev, ts) = page.revisions[page.cursor.min(last)];
        if page.cursor <= last {
            page.cursor += 1;
        }
        let file = page.dir.join(format!("{rev}.wikitext"));
        let wikitext = fs::read_to_string(&file)
            .map_err(|e| IngestError::Fixture(format!("{}: {e}", file.display())))?;
        Ok(RevisionSnapshot {
            page_title: page_title.to_string(),
            revision_id: rev,
            wikitext,
            fetched_at: ts,
            revision_time: ts,
        })
    }

    fn resume_after(&mut self, page_title: &str, revision_id: u64) {
        if let Some(page) = self.pages.get_mut(page_title) {
            page.cursor = page
                .revisions
                .iter()
                .position(|(rev, _)| *rev > revision_id)
                .unwrap_or(page.revisions.len());
        }
    }
}
