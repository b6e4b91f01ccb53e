//! Trainable probabilistic classifiers: multinomial logistic regression and
//! gradient-boosted trees, with optional standardization, per-label loss
//! weights and population-rate recalibration.

pub mod boosting;
mod cv;
mod dataset;
mod estimator;
pub mod linear;
mod params;
mod recalibrate;
mod scaler;

use thiserror::Error;

pub use cv::{cross_validate, stratified_folds, CvPrediction, DEFAULT_FOLDS};
pub use dataset::LabeledDataset;
pub use estimator::{Estimator, FittedModel, TrainingTrace};
pub use params::{BoostingConfig, EstimatorKind, EstimatorParams, LinearConfig, MaxFeatures};
pub use recalibrate::recalibrate;
pub use scaler::Scaler;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("training loss became non-finite at iteration {iteration}; try a lower learning_rate")]
    NonFiniteLoss { iteration: usize },
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("class rate for {0:?} must be > 0")]
    ZeroRate(String),
    #[error("label {label:?} has {count} examples, fewer than {folds} folds")]
    TooFewExamplesPerClass { label: String, count: usize, folds: usize },
    #[error("cross-validation needs at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
}
