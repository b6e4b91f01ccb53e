use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wikiscore_core::ClassLabel;

use super::{read_text, write_text, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    ManualCampaign,
    TraceExtraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelFileHeader {
    pub campaign_id: String,
    pub label_set: Vec<ClassLabel>,
    pub source: LabelSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub rev_id: u64,
    pub label: ClassLabel,
    pub context: String,
}

/// A validated label export: a header line followed by one record per line.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFile {
    pub header: LabelFileHeader,
    pub records: Vec<LabelRecord>,
}

impl LabelFile {
    pub fn new(header: LabelFileHeader, records: Vec<LabelRecord>) -> Result<Self, PipelineError> {
        let file = Self { header, records };
        file.validate()?;
        Ok(file)
    }

    /// Checks labels against the label set and rev_id uniqueness. Line
    /// numbers count the header as line 1.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut seen: HashMap<u64, usize> = HashMap::new();
        for (i, record) in self.records.iter().enumerate() {
            let line = i + 2;
            if !self.header.label_set.contains(&record.label) {
                return Err(PipelineError::UnknownLabel { line, label: record.label.key() });
            }
            if let Some(first_line) = seen.insert(record.rev_id, line) {
                return Err(PipelineError::DuplicateRevision { rev_id: record.rev_id, first_line, line });
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or(PipelineError::MalformedLabelRecord { line: 1, message: "missing header".into() })?;
        let header: LabelFileHeader = serde_json::from_str(first)
            .map_err(|e| PipelineError::MalformedLabelRecord { line: 1, message: format!("header: {e}") })?;
        let mut records = Vec::new();
        let mut seen: HashMap<u64, usize> = HashMap::new();
        for (i, line_text) in lines {
            let line = i + 1;
            let record: LabelRecord = serde_json::from_str(line_text)
                .map_err(|e| PipelineError::MalformedLabelRecord { line, message: e.to_string() })?;
            let label = ClassLabel::resolve(&record.label.key(), &header.label_set)
                .cloned()
                .ok_or_else(|| PipelineError::UnknownLabel { line, label: record.label.key() })?;
            if let Some(first_line) = seen.insert(record.rev_id, line) {
                return Err(PipelineError::DuplicateRevision { rev_id: record.rev_id, first_line, line });
            }
            records.push(LabelRecord { label, ..record });
        }
        Ok(Self { header, records })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Self::parse(&read_text(path.as_ref())?)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for record in &self.records {
            let _ = writeln!(out, "{}", serde_json::to_string(record).expect("record serializes"));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        write_text(path.as_ref(), &self.to_jsonl())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn label_of(&self, rev_id: u64) -> Option<&ClassLabel> {
        self.records.iter().find(|r| r.rev_id == rev_id).map(|r| &r.label)
    }
}

/// Reads and validates a label export. `source` is a path, a `file://` URL,
/// or an `http(s)://` URL resolved against a local mirror directory
/// (`<mirror>/<host>/<path>.jsonl`).
pub fn fetch_labels(source: &str, mirror: Option<&Path>) -> Result<LabelFile, PipelineError> {
    LabelFile::read(resolve_source(source, mirror)?)
}

fn resolve_source(source: &str, mirror: Option<&Path>) -> Result<PathBuf, PipelineError> {
    let Ok(url) = url::Url::parse(source) else {
        return Ok(PathBuf::from(source));
    };
    match url.scheme() {
        "file" => url
            .to_file_path()
            .map_err(|_| PipelineError::InvalidFlag(format!("bad file URL {source:?}"))),
        "http" | "https" => {
            let mirror = mirror.ok_or_else(|| {
                PipelineError::InvalidFlag(format!("{source:?} needs a local mirror directory (--mirror)"))
            })?;
            let host = url.host_str().unwrap_or_default();
            let path = url.path().trim_matches('/');
            Ok(mirror.join(host).join(format!("{path}.jsonl")))
        }
        // Windows-style drive letters and bare relative paths parse as odd schemes.
        _ => Ok(PathBuf::from(source)),
    }
}

#[derive(Debug, Deserialize)]
struct AssessmentEvent {
    context: String,
    rev_id: u64,
    assessment: String,
    timestamp: i64,
}

/// Turns historical assessment events into labels: the latest assessment of
/// each revision wins, and assessments outside the label set are skipped.
/// Returns the label file and the number of skipped events.
pub fn convert_trace(
    text: &str,
    campaign_id: &str,
    label_set: &[ClassLabel],
) -> Result<(LabelFile, usize), PipelineError> {
    let mut latest: HashMap<u64, (i64, usize, AssessmentEvent)> = HashMap::new();
    let mut skipped = 0;
    for (i, line_text) in text.lines().enumerate() {
        if line_text.trim().is_empty() {
            continue;
        }
        let event: AssessmentEvent = serde_json::from_str(line_text)
            .map_err(|e| PipelineError::MalformedLabelRecord { line: i + 1, message: e.to_string() })?;
        if ClassLabel::resolve(&event.assessment, label_set).is_none() {
            skipped += 1;
            continue;
        }
        let replace = latest.get(&event.rev_id).is_none_or(|(ts, line, _)| (event.timestamp, i) > (*ts, *line));
        if replace {
            latest.insert(event.rev_id, (event.timestamp, i, event));
        }
    }
    let mut records: Vec<LabelRecord> = latest
        .into_values()
        .map(|(_, _, e)| LabelRecord {
            rev_id: e.rev_id,
            label: ClassLabel::resolve(&e.assessment, label_set).expect("checked").clone(),
            context: e.context,
        })
        .collect();
    records.sort_by_key(|r| r.rev_id);
    let header = LabelFileHeader {
        campaign_id: campaign_id.to_string(),
        label_set: label_set.to_vec(),
        source: LabelSource::TraceExtraction,
    };
    Ok((LabelFile::new(header, records)?, skipped))
}
