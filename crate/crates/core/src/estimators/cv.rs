use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::LabeledDataset;
use super::estimator::Estimator;
use super::params::EstimatorParams;
use super::EstimatorError;
use crate::label::{ClassLabel, LabelMap};

pub const DEFAULT_FOLDS: usize = 10;

/// A held-out prediction for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPrediction {
    pub index: usize,
    pub fold: usize,
    pub probabilities: LabelMap<f64>,
    pub label: ClassLabel,
}

/// Assigns every example to a fold, stratified by class. Each class is
/// shuffled (seeded) and dealt round-robin, continuing where the previous
/// class stopped, so per-fold class counts differ by at most one.
pub fn stratified_folds(class_of: &[usize], classes: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; class_of.len()];
    let mut next = 0;
    for class in 0..classes {
        let mut members: Vec<usize> = (0..class_of.len()).filter(|&i| class_of[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// Scores every example exactly once with a model trained on the other
/// folds. Results are ordered by example index.
pub fn cross_validate(
    data: &LabeledDataset,
    params: &EstimatorParams,
    folds: usize,
) -> Result<Vec<CvPrediction>, EstimatorError> {
    if folds < 2 {
        return Err(EstimatorError::InvalidFolds(folds));
    }
    data.validate()?;
    let counts = data.class_counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(EstimatorError::DegenerateData("fewer than two classes present".into()));
    }
    for (label, &count) in data.label_set.iter().zip(&counts) {
        if count < folds {
            return Err(EstimatorError::TooFewExamplesPerClass { label: label.key(), count, folds });
        }
    }

    let assignment = stratified_folds(&data.class_indices(), data.label_set.len(), folds, params.seed);
    let mut out = Vec::with_capacity(data.len());
    for fold in 0..folds {
        let train_rows: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] != fold).collect();
        let estimator = Estimator::train(&data.subset(&train_rows), params)?;
        for i in (0..data.len()).filter(|&i| assignment[i] == fold) {
            out.push(CvPrediction {
                index: i,
                fold,
                probabilities: estimator.predict_proba(&data.features[i])?,
                label: data.labels[i].clone(),
            });
        }
    }
    out.sort_by_key(|p| p.index);
    Ok(out)
}
