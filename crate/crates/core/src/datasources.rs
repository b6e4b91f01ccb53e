//! Root data access: revision text and editor metadata.
//!
//! [`DatasourceClient`] is the seam where a live wiki API client would plug
//! in. The shipped [`FixtureClient`] serves newline-delimited JSON records
//! from a directory and can simulate per-fetch latency so batching effects
//! are observable.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable naming the default fixture directory.
pub const FIXTURES_ENV: &str = "WIKISCORE_FIXTURES";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevisionRecord {
    pub revision_id: u64,
    pub context_id: String,
    pub text: String,
    #[serde(default)]
    pub parent_text: String,
    pub user_is_anon: bool,
    pub user_account_age_seconds: u64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasourceError {
    #[error("revision {revision_id} not found in {context}")]
    RevisionNotFound { context: String, revision_id: u64 },
    #[error("upstream failure: {0}")]
    Upstream(String),
}

pub type FetchResult = Result<Arc<RevisionRecord>, DatasourceError>;

pub trait DatasourceClient: Send + Sync {
    fn get_revision(&self, context: &str, revision_id: u64) -> FetchResult;

    /// Fetches many revisions with a single round trip. One result per id,
    /// in input order; per-item misses are embedded in the list.
    fn get_revisions_batch(
        &self,
        context: &str,
        revision_ids: &[u64],
    ) -> Result<Vec<FetchResult>, DatasourceError>;
}

/// Fixture-backed client. The index is read-only after load.
#[derive(Debug, Default)]
pub struct FixtureClient {
    index: HashMap<(String, u64), Arc<RevisionRecord>>,
    latency: Duration,
    fetches: AtomicU64,
}

impl FixtureClient {
    pub fn from_records(records: impl IntoIterator<Item = RevisionRecord>) -> Self {
        let index = records
            .into_iter()
            .map(|r| ((r.context_id.clone(), r.revision_id), Arc::new(r)))
            .collect();
        Self { index, latency: Duration::ZERO, fetches: AtomicU64::new(0) }
    }

    /// Loads every `*.jsonl` file in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, DatasourceError> {
        let dir = dir.as_ref();
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| DatasourceError::Upstream(format!("{}: {e}", dir.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
            .collect();
        paths.sort();
        let mut records = Vec::new();
        for path in paths {
            records.extend(read_fixture_file(&path)?);
        }
        Ok(Self::from_records(records))
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn latency(&self) -> Duration {
        self.latency
    }

    /// Number of physical fetches (single or batch) served so far.
    pub fn fetch_count(&self) -> u64 {
        self.fetches.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    fn charge_fetch(&self) {
        self.fetches.fetch_add(1, Ordering::Relaxed);
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
    }

    fn lookup(&self, context: &str, revision_id: u64) -> FetchResult {
        self.index
            .get(&(context.to_string(), revision_id))
            .cloned()
            .ok_or_else(|| DatasourceError::RevisionNotFound {
                context: context.to_string(),
                revision_id,
            })
    }
}

impl DatasourceClient for FixtureClient {
    fn get_revision(&self, context: &str, revision_id: u64) -> FetchResult {
        self.charge_fetch();
        self.lookup(context, revision_id)
    }

    fn get_revisions_batch(
        &self,
        context: &str,
        revision_ids: &[u64],
    ) -> Result<Vec<FetchResult>, DatasourceError> {
        if revision_ids.is_empty() {
            return Ok(Vec::new());
        }
        self.charge_fetch();
        Ok(revision_ids.iter().map(|&id| self.lookup(context, id)).collect())
    }
}

pub fn read_fixture_file(path: &Path) -> Result<Vec<RevisionRecord>, DatasourceError> {
    let file = fs::File::open(path)
        .map_err(|e| DatasourceError::Upstream(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasourceError::Upstream(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RevisionRecord = serde_json::from_str(&line).map_err(|e| {
            DatasourceError::Upstream(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_fixture_file<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a RevisionRecord>,
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
