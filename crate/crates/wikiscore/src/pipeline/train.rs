use wikiscore_core::estimators::{cross_validate, Estimator, EstimatorParams};
use wikiscore_core::features::FeatureSet;
use wikiscore_core::model_store::{compute_statistics, Environment, ModelInfo, ScoringModel, Statistics, Version};
use wikiscore_core::ClassLabel;

use super::dataset::Dataset;
use super::PipelineError;

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub params: EstimatorParams,
    pub folds: usize,
    pub version: Version,
    /// Class whose probability the model reports for audits; defaults to
    /// `true` for boolean label sets and the first label otherwise.
    pub target_class: Option<ClassLabel>,
}

/// Cross-validates, computes fitness statistics from the held-out
/// predictions, then retrains on every row. `model_name` names the model
/// (and the label it predicts).
pub fn cv_train(
    dataset: &Dataset,
    feature_set: &FeatureSet,
    model_name: &str,
    options: &TrainOptions,
) -> Result<ScoringModel, PipelineError> {
    let data = dataset.to_labeled(feature_set)?;
    let label_set = data.label_set.clone();
    options.params.validate(&label_set)?;
    let predictions = cross_validate(&data, &options.params, options.folds)?;
    let pairs: Vec<_> = predictions.into_iter().map(|p| (p.probabilities, p.label)).collect();
    let statistics = compute_statistics(&pairs, &label_set)?;
    let estimator = Estimator::train(&data, &options.params)?;
    let info = ModelInfo {
        model_type: options.params.kind.type_name().to_string(),
        version: options.version,
        environment: Environment::current(),
        params: options.params.info_json(&label_set)?,
        statistics,
    };
    let target = match &options.target_class {
        Some(label) => ClassLabel::resolve(&label.key(), &label_set)
            .cloned()
            .ok_or_else(|| PipelineError::InvalidFlag(format!("target class {label} is not in the label set")))?,
        None => default_target(&label_set),
    };
    Ok(ScoringModel::new(model_name, target, feature_set.clone(), estimator, info)?)
}

fn default_target(label_set: &[ClassLabel]) -> ClassLabel {
    label_set
        .iter()
        .find(|l| **l == ClassLabel::Bool(true))
        .unwrap_or(&label_set[0])
        .clone()
}

/// Fitness statistics of an existing model on a labeled dataset.
pub fn evaluate(model: &ScoringModel, dataset: &Dataset) -> Result<Statistics, PipelineError> {
    let data = dataset.to_labeled(&model.feature_set)?;
    let pairs = data
        .features
        .iter()
        .zip(&data.labels)
        .map(|(row, label)| Ok((model.predict(row)?, label.clone())))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(compute_statistics(&pairs, &model.label_set())?)
}
