//! On-disk response cache keyed by (client, normalized query).
//!
//! Entries are JSON files written to a temp file and renamed into place, so a
//! reader never sees a half-written entry.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::client::ItemNutrition;
use super::EnrichError;
use crate::time::{Timestamp, DAY_MS};

pub const DEFAULT_TTL_DAYS: i64 = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub client: String,
    pub query: String,
    pub fetched_at: Timestamp,
    pub response: ItemNutrition,
}

#[derive(Clone, Debug)]
pub struct EnrichmentCache {
    root: PathBuf,
    ttl_ms: i64,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl EnrichmentCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        EnrichmentCache {
            root: root.into(),
            ttl_ms: DEFAULT_TTL_DAYS * DAY_MS,
        }
    }

    pub fn with_ttl_days(mut self, days: i64) -> Self {
        self.ttl_ms = days * DAY_MS;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, client: &str, query_key: &str) -> PathBuf {
        let digest = Sha256::digest(query_key.as_bytes());
        let safe_client: String = client
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        self.root.join(safe_client).join(format!("{}.json", hex(&digest)))
    }

    /// Fresh entry for the key, if any. Expired or unreadable entries are
    /// treated as misses.
    pub fn get(&self, client: &str, query_key: &str, now: Timestamp) -> Option<CacheEntry> {
        let text = fs::read_to_string(self.path_for(client, query_key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        if entry.query != query_key || now.millis() - entry.fetched_at.millis() > self.ttl_ms {
            return None;
        }
        Some(entry)
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), EnrichError> {
        let path = self.path_for(&entry.client, &entry.query);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir).map_err(|e| EnrichError::Io(e.to_string()))?;
        let body = crate::canonical::to_canonical_string(entry).map_err(|e| EnrichError::Io(e.to_string()))?;
        let mut tmp = tempfile_in(dir)?;
        tmp.1.write_all(body.as_bytes()).map_err(|e| EnrichError::Io(e.to_string()))?;
        tmp.1.sync_all().map_err(|e| EnrichError::Io(e.to_string()))?;
        fs::rename(&tmp.0, &path).map_err(|e| EnrichError::Io(e.to_string()))?;
        Ok(())
    }
}

fn tempfile_in(dir: &Path) -> Result<(PathBuf, fs::File), EnrichError> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let path = dir.join(format!(".tmp-{}-{n}", std::process::id()));
    let file = fs::File::create(&path).map_err(|e| EnrichError::Io(e.to_string()))?;
    Ok((path, file))
}
