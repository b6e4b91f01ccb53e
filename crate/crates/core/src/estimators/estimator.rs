use serde::{Deserialize, Serialize};

use super::boosting::BoostedModel;
use super::dataset::LabeledDataset;
use super::linear::LinearModel;
use super::params::{EstimatorKind, EstimatorParams};
use super::recalibrate::recalibrate_slice;
use super::scaler::Scaler;
use super::EstimatorError;
use crate::label::{ClassLabel, LabelMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    LinearLogistic(LinearModel),
    GradientBoosting(BoostedModel),
}

/// A trained, immutable classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub kind: EstimatorKind,
    pub label_set: Vec<ClassLabel>,
    pub feature_names: Vec<String>,
    pub scaler: Option<Scaler>,
    pub model: FittedModel,
    /// Class rates of the training sample, aligned with `label_set`.
    pub sample_rates: Vec<f64>,
    /// Deployment class rates, aligned with `label_set`, when configured.
    pub population_rates: Option<Vec<f64>>,
}

/// Per-round training deviance, reported for boosted models.
pub type TrainingTrace = Vec<f64>;

impl Estimator {
    pub fn train(data: &LabeledDataset, params: &EstimatorParams) -> Result<Self, EstimatorError> {
        Self::train_with_trace(data, params).map(|(e, _)| e)
    }

    pub fn train_with_trace(
        data: &LabeledDataset,
        params: &EstimatorParams,
    ) -> Result<(Self, TrainingTrace), EstimatorError> {
        data.validate()?;
        params.validate(&data.label_set)?;
        let counts = data.class_counts();
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(EstimatorError::DegenerateData("fewer than two classes present".into()));
        }
        let y = data.class_indices();
        let weights: Vec<f64> = data.labels.iter().map(|l| params.label_weight(l)).collect();

        let scaler = (params.center || params.scale)
            .then(|| Scaler::fit(&data.features, params.center, params.scale));
        let x: Vec<Vec<f64>> = match &scaler {
            Some(s) => data.features.iter().map(|r| s.transform(r)).collect(),
            None => data.features.clone(),
        };

        let classes = data.label_set.len();
        let (model, trace) = match params.kind {
            EstimatorKind::LinearLogistic => {
                let m = LinearModel::fit(&x, &y, &weights, classes, &params.linear()?)?;
                (FittedModel::LinearLogistic(m), Vec::new())
            }
            EstimatorKind::GradientBoosting => {
                let (m, trace) = BoostedModel::fit(&x, &y, &weights, classes, &params.boosting()?, params.seed)?;
                (FittedModel::GradientBoosting(m), trace)
            }
        };

        let n = data.len() as f64;
        let sample_rates: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let population_rates = params.population_rates.as_ref().map(|rates| {
            data.label_set
                .iter()
                .map(|l| rates.get(&l.key()).copied().unwrap_or(0.0))
                .collect::<Vec<_>>()
        });
        if let Some(rates) = &population_rates {
            for ((label, p), s) in data.label_set.iter().zip(rates).zip(&sample_rates) {
                if *p <= 0.0 || *s <= 0.0 {
                    return Err(EstimatorError::ZeroRate(label.key()));
                }
            }
        }

        let estimator = Self {
            kind: params.kind,
            label_set: data.label_set.clone(),
            feature_names: data.feature_names.clone(),
            scaler,
            model,
            sample_rates,
            population_rates,
        };
        Ok((estimator, trace))
    }

    /// Class probabilities in label-set order, recalibrated to population
    /// rates when configured.
    pub fn predict_proba(&self, features: &[f64]) -> Result<LabelMap<f64>, EstimatorError> {
        let probs = self.predict_vec(features)?;
        Ok(self.label_set.iter().cloned().zip(probs).collect())
    }

    pub fn predict_vec(&self, features: &[f64]) -> Result<Vec<f64>, EstimatorError> {
        if features.len() != self.feature_names.len() {
            return Err(EstimatorError::DimensionMismatch {
                expected: self.feature_names.len(),
                found: features.len(),
            });
        }
        let scaled;
        let row = match &self.scaler {
            Some(s) => {
                scaled = s.transform(features);
                &scaled[..]
            }
            None => features,
        };
        let raw = match &self.model {
            FittedModel::LinearLogistic(m) => m.predict(row),
            FittedModel::GradientBoosting(m) => m.predict(row),
        };
        Ok(match &self.population_rates {
            Some(pop) => {
                let ratios: Vec<f64> = pop.iter().zip(&self.sample_rates).map(|(p, s)| p / s).collect();
                recalibrate_slice(&raw, &ratios)
            }
            None => raw,
        })
    }
}
