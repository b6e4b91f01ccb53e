//! Core of the wikiscore service: feature extraction with value injection,
//! trainable classifiers, versioned model files with fitness statistics,
//! threshold optimization queries, and the cached scoring runtime.

pub mod datasources;
pub mod estimators;
pub mod features;
pub mod label;
pub mod model_store;
pub mod runtime;
pub mod scoring;
pub mod synthetic;
pub mod threshold_query;

pub use label::{ClassLabel, LabelMap};
