//! The model build pipeline: labels → dataset with cached features →
//! cross-validated training → model file, plus manifest-driven rebuilds.

mod audit;
mod dataset;
mod fixtures;
mod labels;
mod manifest;
mod train;

use std::path::Path;

use thiserror::Error;
use wikiscore_core::datasources::DatasourceError;
use wikiscore_core::estimators::EstimatorError;
use wikiscore_core::features::FeatureSetError;
use wikiscore_core::model_store::{ModelStoreError, StatisticsError};

pub use audit::{audit_model, AuditOptions};
pub use dataset::{extract, Dataset, DatasetHeader, DatasetRow, ExtractOptions, ExtractReport, DEFAULT_FAILURE_TOLERANCE};
pub use fixtures::{generate_fixtures, FixtureSummary};
pub use labels::{convert_trace, fetch_labels, LabelFile, LabelFileHeader, LabelRecord, LabelSource};
pub use manifest::{build, BuildOptions, BuildTarget, Manifest, TargetOutcome, TargetStatus};
pub use train::{cv_train, evaluate, TrainOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: malformed label record: {message}")]
    MalformedLabelRecord { line: usize, message: String },
    #[error("line {line}: label {label:?} is not in the label set")]
    UnknownLabel { line: usize, label: String },
    #[error("revision {rev_id} appears on line {first_line} and again on line {line}")]
    DuplicateRevision { rev_id: u64, first_line: usize, line: usize },
    #[error("line {line}: malformed dataset row: {message}")]
    MalformedDataset { line: usize, message: String },
    #[error("extraction failed for {failed} of {total} rows (tolerance {tolerance}):\n{report}")]
    ExtractionFailed { failed: usize, total: usize, tolerance: f64, report: String },
    #[error("invalid flag: {0}")]
    InvalidFlag(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("target {target:?} failed: {source}")]
    Target { target: String, source: Box<PipelineError> },
    #[error(transparent)]
    FeatureSet(#[from] FeatureSetError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    ModelStore(#[from] ModelStoreError),
    #[error(transparent)]
    Statistics(#[from] StatisticsError),
    #[error(transparent)]
    Datasource(#[from] DatasourceError),
}

pub(crate) fn io_error(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), message: e.to_string() }
}

pub(crate) fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Writes `text` atomically, creating parent directories.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    wikiscore_core::model_store::write_atomic(path, text.as_bytes())?;
    Ok(())
}
