use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use indexmap::IndexMap;
use slots::Slots;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use wikiscore_core::datasources::DatasourceClient;
use wikiscore_core::estimators::LabeledDataset;
use wikiscore_core::features::{ExtractionContext, FeatureSet, InjectionOverlay, RecordSource, Value};
use wikiscore_core::ClassLabel;

use super::labels::LabelFile;
use super::{read_text, write_text, PipelineError};

pub const DEFAULT_FAILURE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub campaign_id: String,
    pub feature_set: String,
    pub label_set: Vec<ClassLabel>,
    /// Qualified feature names (`feature.<name>`), in extraction order.
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRow {
    pub rev_id: u64,
    pub label: ClassLabel,
    pub cache: IndexMap<String, Json>,
}

/// Labels joined with their extracted feature values, one row per line
/// after a header line.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) =
            lines.next().ok_or(PipelineError::MalformedDataset { line: 1, message: "missing header".into() })?;
        let header: DatasetHeader = serde_json::from_str(first)
            .map_err(|e| PipelineError::MalformedDataset { line: 1, message: format!("header: {e}") })?;
        let rows = lines
            .map(|(i, l)| {
                let row: DatasetRow = serde_json::from_str(l)
                    .map_err(|e| PipelineError::MalformedDataset { line: i + 1, message: e.to_string() })?;
                let label = ClassLabel::resolve(&row.label.key(), &header.label_set)
                    .cloned()
                    .ok_or_else(|| PipelineError::UnknownLabel { line: i + 1, label: row.label.key() })?;
                Ok(DatasetRow { label, ..row })
            })
            .collect::<Result<_, PipelineError>>()?;
        Ok(Self { header, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Self::parse(&read_text(path.as_ref())?)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", serde_json::to_string(row).expect("row serializes"));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        write_text(path.as_ref(), &self.to_jsonl())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The numeric training matrix for `feature_set`, converting cached
    /// values exactly as the scoring path does.
    pub fn to_labeled(&self, feature_set: &FeatureSet) -> Result<LabeledDataset, PipelineError> {
        let mut features = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let line = i + 2;
            let values = feature_set
                .features
                .iter()
                .map(|decl| {
                    let key = format!("feature.{}", decl.name);
                    let json = row.cache.get(&key).ok_or_else(|| PipelineError::MalformedDataset {
                        line,
                        message: format!("missing {key}"),
                    })?;
                    Value::from_json_as(json, decl.value_type).and_then(|v| v.as_f64()).ok_or_else(|| {
                        PipelineError::MalformedDataset { line, message: format!("{key} is not a {}", decl.value_type) }
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            features.push(values);
        }
        Ok(LabeledDataset::new(
            feature_set.feature_names(),
            self.header.label_set.clone(),
            features,
            self.rows.iter().map(|r| r.label.clone()).collect(),
        )?)
    }
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub workers: usize,
    /// Largest tolerated share of failed rows.
    pub tolerance: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        let workers = std::thread::available_parallelism().map_or(4, |n| n.get());
        Self { workers, tolerance: DEFAULT_FAILURE_TOLERANCE }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractReport {
    pub total: usize,
    pub extracted: usize,
    pub reused: usize,
    pub failures: Vec<(u64, String)>,
}

impl ExtractReport {
    pub fn failure_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.failures.len() as f64 / self.total as f64
        }
    }

    /// Fails when the share of failed rows exceeds `tolerance`.
    pub fn check(&self, tolerance: f64) -> Result<(), PipelineError> {
        if self.failure_rate() <= tolerance {
            return Ok(());
        }
        let mut report = String::new();
        for (rev, message) in &self.failures {
            let _ = writeln!(report, "  {rev}: {message}");
        }
        Err(PipelineError::ExtractionFailed {
            failed: self.failures.len(),
            total: self.total,
            tolerance,
            report,
        })
    }
}

/// Extracts `feature_set` for every labeled revision. Rows already present
/// in a compatible `previous` dataset are reused without fetching. Failed
/// rows are left out of the dataset and listed in the report.
pub fn extract(
    labels: &LabelFile,
    feature_set: &FeatureSet,
    client: &dyn DatasourceClient,
    previous: Option<&Dataset>,
    options: &ExtractOptions,
) -> Result<(Dataset, ExtractReport), PipelineError> {
    let graph = feature_set.build_graph()?;
    let names: Vec<String> = feature_set.feature_names();
    let header = DatasetHeader {
        campaign_id: labels.header.campaign_id.clone(),
        feature_set: feature_set.name.clone(),
        label_set: labels.header.label_set.clone(),
        features: names.iter().map(|n| format!("feature.{n}")).collect(),
    };
    let reusable: HashMap<u64, &DatasetRow> = previous
        .filter(|p| p.header.features == header.features && p.header.feature_set == header.feature_set)
        .map(|p| p.rows.iter().map(|r| (r.rev_id, r)).collect())
        .unwrap_or_default();

    let records = &labels.records;
    let slots: Slots<Result<IndexMap<String, Json>, String>> = Slots::new(records.len());
    let todo: Vec<usize> = (0..records.len()).filter(|&i| !reusable.contains_key(&records[i].rev_id)).collect();
    let next = AtomicUsize::new(0);
    let overlay = InjectionOverlay::empty();
    std::thread::scope(|scope| {
        for _ in 0..options.workers.max(1).min(todo.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = todo.get(k) else { break };
                let record = &records[i];
                let mut cx = ExtractionContext::new(
                    &graph,
                    &record.context,
                    record.rev_id,
                    RecordSource::Client(client),
                    &overlay,
                );
                let result = cx
                    .extract_many(&names)
                    .map(|values| {
                        header.features.iter().cloned().zip(values.iter().map(Value::to_json)).collect()
                    })
                    .map_err(|e| e.to_string());
                slots.set(i, result);
            });
        }
    });

    let mut report = ExtractReport { total: records.len(), ..Default::default() };
    let mut rows = Vec::with_capacity(records.len());
    for (i, (record, computed)) in records.iter().zip(slots.into_inner()).enumerate() {
        let cache = match (reusable.get(&record.rev_id), computed) {
            (Some(row), _) => {
                report.reused += 1;
                row.cache.clone()
            }
            (None, Some(Ok(cache))) => {
                report.extracted += 1;
                cache
            }
            (None, Some(Err(message))) => {
                report.failures.push((record.rev_id, message));
                continue;
            }
            (None, None) => unreachable!("row {i} was neither reused nor extracted"),
        };
        rows.push(DatasetRow { rev_id: record.rev_id, label: record.label.clone(), cache });
    }
    Ok((Dataset { header, rows }, report))
}

mod slots {
    use std::sync::Mutex;

    /// Write-once result slots filled from several threads.
    pub struct Slots<T>(Vec<Mutex<Option<T>>>);

    impl<T> Slots<T> {
        pub fn new(n: usize) -> Self {
            Self((0..n).map(|_| Mutex::new(None)).collect())
        }

        pub fn set(&self, i: usize, value: T) {
            *self.0[i].lock().expect("slot lock") = Some(value);
        }

        pub fn into_inner(self) -> Vec<Option<T>> {
            self.0.into_iter().map(|m| m.into_inner().expect("slot lock")).collect()
        }
    }
}
