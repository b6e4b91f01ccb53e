use super::EstimatorError;
use crate::label::ClassLabel;

/// Feature rows with one class label each. Absent values are encoded as 0
/// by extraction, so every row is complete.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    pub label_set: Vec<ClassLabel>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<ClassLabel>,
}

impl LabeledDataset {
    pub fn new(
        feature_names: Vec<String>,
        label_set: Vec<ClassLabel>,
        features: Vec<Vec<f64>>,
        labels: Vec<ClassLabel>,
    ) -> Result<Self, EstimatorError> {
        let data = Self { feature_names, label_set, features, labels };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let invalid = |m: String| Err(EstimatorError::InvalidDataset(m));
        if self.features.len() != self.labels.len() {
            return invalid(format!("{} rows but {} labels", self.features.len(), self.labels.len()));
        }
        if self.len() < 2 {
            return invalid("need at least 2 examples".into());
        }
        let d = self.dim();
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != d {
                return invalid(format!("row {i} has {} values, expected {d}", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return invalid(format!("row {i} has a non-finite value"));
            }
        }
        for (i, label) in self.labels.iter().enumerate() {
            if !self.label_set.contains(label) {
                return invalid(format!("row {i} label {label} not in label set"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Label indexes into `label_set`.
    pub fn class_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .map(|l| self.label_set.iter().position(|c| c == l).expect("validated label"))
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_set.len()];
        for c in self.class_indices() {
            counts[c] += 1;
        }
        counts
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            label_set: self.label_set.clone(),
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}
