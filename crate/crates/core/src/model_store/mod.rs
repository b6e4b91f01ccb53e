//! Versioned model files, model information documents and the registry of
//! loaded models.
//!
//! A model file is one header line followed by a JSON body:
//!
//! ```text
//! wikiscore-model format=1 sha256=<hex digest of the body>
//! {"name": ..., "info": {...}, "feature_set": {...}, "estimator": {...}}
//! ```

mod info;
mod registry;
mod statistics;
mod thresholds;
mod version;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use info::{Environment, ModelInfo};
pub use registry::ModelRegistry;
pub use statistics::{
    argmax_index, average_precision, compute_statistics, roc_auc, Counts, MetricSummary, Statistics,
    StatisticsError,
};
pub use thresholds::{grid_threshold, ThresholdRow, ThresholdTable, GRID_POINTS};
pub use version::{Version, VersionError, VersionPart};

use crate::estimators::{Estimator, EstimatorError};
use crate::features::{DependencyGraph, FeatureSet, FeatureSetError};
use crate::label::{ClassLabel, LabelMap};
use crate::threshold_query::QueryError;

pub const MODEL_FORMAT: u32 = 1;
pub const MODEL_EXTENSION: &str = "model";
const MAGIC: &str = "wikiscore-model";

#[derive(Debug, Error)]
pub enum ModelStoreError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("corrupt model file: {0}")]
    CorruptModelFile(String),
    #[error("model file format {found} is not readable by this version (expects {expected})")]
    IncompatibleFormatVersion { found: u32, expected: u32 },
    #[error("unknown field path {0:?}")]
    UnknownFieldPath(String),
    #[error("{0:?} does not address a threshold table")]
    NotAThresholdTable(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    FeatureSet(#[from] FeatureSetError),
    #[error("model {model:?}: feature list does not match the estimator's inputs")]
    FeatureMismatch { model: String },
}

/// A trained model ready to score: estimator, the feature set it reads, and
/// its model info. Immutable once loaded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoringModel {
    pub name: String,
    pub context: String,
    /// The class whose probability audits and histograms report.
    pub target_label: ClassLabel,
    pub info: ModelInfo,
    pub feature_set: FeatureSet,
    pub estimator: Estimator,
    #[serde(skip)]
    graph: DependencyGraph,
}

impl ScoringModel {
    pub fn new(
        name: impl Into<String>,
        target_label: ClassLabel,
        feature_set: FeatureSet,
        estimator: Estimator,
        info: ModelInfo,
    ) -> Result<Self, ModelStoreError> {
        let mut model = Self {
            name: name.into(),
            context: feature_set.context.clone(),
            target_label,
            info,
            feature_set,
            estimator,
            graph: DependencyGraph::default(),
        };
        model.prepare()?;
        Ok(model)
    }

    fn prepare(&mut self) -> Result<(), ModelStoreError> {
        if self.feature_set.feature_names() != self.estimator.feature_names {
            return Err(ModelStoreError::FeatureMismatch { model: self.name.clone() });
        }
        self.graph = self.feature_set.build_graph()?;
        Ok(())
    }

    pub fn graph(&self) -> &DependencyGraph {
        &self.graph
    }

    pub fn version(&self) -> Version {
        self.info.version
    }

    pub fn label_set(&self) -> &[ClassLabel] {
        &self.estimator.label_set
    }

    pub fn feature_names(&self) -> &[String] {
        &self.estimator.feature_names
    }

    pub fn predict(&self, features: &[f64]) -> Result<LabelMap<f64>, EstimatorError> {
        self.estimator.predict_proba(features)
    }

    /// Copy with a bumped version; everything else, statistics included, is
    /// unchanged.
    pub fn bump_version(&self, part: VersionPart) -> Self {
        let mut next = self.clone();
        next.info.version = self.info.version.bump(part);
        next
    }

    pub fn model_info(&self, field_path: Option<&str>) -> Result<serde_json::Value, ModelStoreError> {
        self.info.lookup(field_path)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let body = serde_json::to_vec(self).expect("model serializes");
        let digest = hex::encode(Sha256::digest(&body));
        let mut out = format!("{MAGIC} format={MODEL_FORMAT} sha256={digest}\n").into_bytes();
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelStoreError> {
        Self::decode(bytes, MODEL_FORMAT)
    }

    /// Decodes a model file as a reader of format `reader_format` would.
    /// There are no migrations: any other format is incompatible.
    pub fn decode(bytes: &[u8], reader_format: u32) -> Result<Self, ModelStoreError> {
        let corrupt = |m: &str| ModelStoreError::CorruptModelFile(m.to_string());
        let newline = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| corrupt("missing header"))?;
        let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| corrupt("header is not UTF-8"))?;
        let body = &bytes[newline + 1..];

        let mut fields = header.split(' ');
        if fields.next() != Some(MAGIC) {
            return Err(corrupt("not a model file"));
        }
        let format = fields
            .next()
            .and_then(|f| f.strip_prefix("format="))
            .and_then(|f| f.parse::<u32>().ok())
            .ok_or_else(|| corrupt("missing format version"))?;
        if format != reader_format {
            return Err(ModelStoreError::IncompatibleFormatVersion { found: format, expected: reader_format });
        }
        let expected = fields
            .next()
            .and_then(|f| f.strip_prefix("sha256="))
            .ok_or_else(|| corrupt("missing checksum"))?;
        if fields.next().is_some() {
            return Err(corrupt("trailing header fields"));
        }
        if hex::encode(Sha256::digest(body)) != expected {
            return Err(corrupt("checksum mismatch"));
        }
        let mut model: ScoringModel =
            serde_json::from_slice(body).map_err(|e| ModelStoreError::CorruptModelFile(e.to_string()))?;
        model.prepare()?;
        Ok(model)
    }

    /// Writes the model atomically (temporary file, then rename).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelStoreError> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelStoreError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> ModelStoreError {
    ModelStoreError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ModelStoreError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_error(path, e)
    })
}
