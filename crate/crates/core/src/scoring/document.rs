use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::datasources::DatasourceError;
use crate::features::{FeatureError, Value};
use crate::label::{ClassLabel, LabelMap};
use crate::runtime::{LeaderPanicked, TaskError};

/// Solved model inputs keyed by qualified name (`feature.words_count`).
pub type FeatureValues = IndexMap<String, Value>;

/// A model's prediction for one revision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreDocument {
    pub prediction: ClassLabel,
    pub probability: LabelMap<f64>,
    /// Attached on request; serialized beside the score, not inside it.
    #[serde(skip)]
    pub features: Option<FeatureValues>,
}

impl ScoreDocument {
    pub fn new(probability: LabelMap<f64>, features: Option<FeatureValues>) -> Self {
        let prediction = probability.argmax().cloned().expect("non-empty probability map");
        Self { prediction, probability, features }
    }

    pub fn without_features(mut self) -> Self {
        self.features = None;
        self
    }

    /// Checks the document invariants: probabilities are finite, in
    /// [0, 1], sum to 1, and the prediction is their first argmax.
    pub fn validate(&self) -> Result<(), String> {
        if self.probability.is_empty() {
            return Err("empty probability map".into());
        }
        if self.probability.values().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
            return Err(format!("probability out of range: {:?}", self.probability));
        }
        let total: f64 = self.probability.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("probabilities sum to {total}"));
        }
        if self.probability.argmax() != Some(&self.prediction) {
            return Err(format!("prediction {} is not the argmax", self.prediction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorType {
    RevisionNotFound,
    ModelNotFound,
    FeatureExtractionError,
    TimeoutError,
    Overloaded,
    TypeMismatch,
    UnknownDependent,
    DatasourceError,
    InternalError,
}

impl ErrorType {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::RevisionNotFound => "RevisionNotFound",
            ErrorType::ModelNotFound => "ModelNotFound",
            ErrorType::FeatureExtractionError => "FeatureExtractionError",
            ErrorType::TimeoutError => "TimeoutError",
            ErrorType::Overloaded => "Overloaded",
            ErrorType::TypeMismatch => "TypeMismatch",
            ErrorType::UnknownDependent => "UnknownDependent",
            ErrorType::DatasourceError => "DatasourceError",
            ErrorType::InternalError => "InternalError",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A per-item scoring failure, embedded in responses in place of a score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDocument {
    #[serde(rename = "type")]
    pub error_type: ErrorType,
    pub message: String,
}

impl ErrorDocument {
    pub fn new(error_type: ErrorType, message: impl Into<String>) -> Self {
        Self { error_type, message: message.into() }
    }
}

impl fmt::Display for ErrorDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.error_type, self.message)
    }
}

impl std::error::Error for ErrorDocument {}

impl From<DatasourceError> for ErrorDocument {
    fn from(e: DatasourceError) -> Self {
        let kind = match e {
            DatasourceError::RevisionNotFound { .. } => ErrorType::RevisionNotFound,
            DatasourceError::Upstream(_) => ErrorType::DatasourceError,
        };
        ErrorDocument::new(kind, e.to_string())
    }
}

impl From<FeatureError> for ErrorDocument {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Datasource { source, .. } => source.into(),
            FeatureError::TypeMismatch { .. } => ErrorDocument::new(ErrorType::TypeMismatch, e.to_string()),
            FeatureError::UnknownDependent(_) => ErrorDocument::new(ErrorType::UnknownDependent, e.to_string()),
            other => ErrorDocument::new(ErrorType::FeatureExtractionError, other.to_string()),
        }
    }
}

impl From<TaskError> for ErrorDocument {
    fn from(e: TaskError) -> Self {
        let kind = match e {
            TaskError::Overloaded { .. } => ErrorType::Overloaded,
            TaskError::Timeout(_) => ErrorType::TimeoutError,
            TaskError::Panicked => ErrorType::InternalError,
        };
        ErrorDocument::new(kind, e.to_string())
    }
}

impl From<LeaderPanicked> for ErrorDocument {
    fn from(_: LeaderPanicked) -> Self {
        ErrorDocument::new(ErrorType::InternalError, "scoring task panicked")
    }
}

pub type ScoreResult = Result<ScoreDocument, ErrorDocument>;
