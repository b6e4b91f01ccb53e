//! Fitness statistics computed from held-out predictions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::thresholds::ThresholdTable;
use crate::label::{ClassLabel, LabelMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatisticsError {
    #[error("no predictions to evaluate")]
    EmptyPredictions,
    #[error("label {0} is not in the label set")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub labels: LabelMap<u64>,
    pub n: u64,
    /// actual label → predicted label → count
    pub predictions: LabelMap<LabelMap<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    #[serde(rename = "macro")]
    pub macro_avg: f64,
    #[serde(rename = "micro")]
    pub micro_avg: f64,
    pub labels: LabelMap<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub counts: Counts,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub pr_auc: MetricSummary,
    pub roc_auc: MetricSummary,
    pub thresholds: LabelMap<ThresholdTable>,
}

/// Area under the ROC curve as the probability that a random positive
/// outscores a random negative, ties counting one half. Computed from
/// mid-ranks. Returns 0.5 when either class is absent.
pub fn roc_auc(scores: &[(f64, bool)]) -> f64 {
    let positives = scores.iter().filter(|s| s.1).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return 0.5;
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // 1-based ranks i+1..=j share their mean.
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid_rank * sorted[i..j].iter().filter(|s| s.1).count() as f64;
        i = j;
    }
    let p = positives as f64;
    (rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64)
}

/// Average precision: precision at each distinct score, descending,
/// weighted by the recall gained there. Returns 0 without positives.
pub fn average_precision(scores: &[(f64, bool)]) -> f64 {
    let positives = scores.iter().filter(|s| s.1).count();
    if positives == 0 {
        return 0.0;
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let mut gained = 0;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            gained += usize::from(sorted[j].1);
            j += 1;
        }
        tp += gained;
        seen += j - i;
        if gained > 0 {
            ap += gained as f64 * (tp as f64 / seen as f64);
        }
        i = j;
    }
    ap / positives as f64
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Computes counts, precision/recall of argmax predictions, per-label ROC
/// and PR areas, and threshold tables.
///
/// Precision and recall micro averages pool counts across labels (both
/// equal accuracy for single-label argmax predictions). AUC micro averages
/// weight each label by its frequency.
pub fn compute_statistics(
    predictions: &[(LabelMap<f64>, ClassLabel)],
    label_set: &[ClassLabel],
) -> Result<Statistics, StatisticsError> {
    if predictions.is_empty() {
        return Err(StatisticsError::EmptyPredictions);
    }
    let k = label_set.len();
    let index_of = |l: &ClassLabel| label_set.iter().position(|c| c == l);
    let mut confusion = vec![vec![0u64; k]; k];
    for (probs, actual) in predictions {
        let a = index_of(actual).ok_or_else(|| StatisticsError::UnknownLabel(actual.key()))?;
        let p = argmax_index(probs, label_set);
        confusion[a][p] += 1;
    }
    let n = predictions.len() as u64;
    let actual_counts: Vec<u64> = confusion.iter().map(|row| row.iter().sum()).collect();
    let predicted_counts: Vec<u64> = (0..k).map(|p| confusion.iter().map(|row| row[p]).sum()).collect();
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();

    let per_label = |f: &dyn Fn(usize) -> f64| LabelMap::from_fn(label_set, |l| f(index_of(l).unwrap()));
    let frequency_weighted = |values: &LabelMap<f64>| {
        values.values().zip(&actual_counts).map(|(v, &c)| v * c as f64).sum::<f64>() / n as f64
    };
    let summary = |labels: LabelMap<f64>, micro: f64| MetricSummary {
        macro_avg: labels.values().sum::<f64>() / k as f64,
        micro_avg: micro,
        labels,
    };

    let precision = per_label(&|i| ratio(confusion[i][i], predicted_counts[i]));
    let recall = per_label(&|i| ratio(confusion[i][i], actual_counts[i]));

    let label_scores: Vec<Vec<(f64, bool)>> = label_set
        .iter()
        .map(|label| {
            predictions
                .iter()
                .map(|(probs, actual)| (probs.get(label).copied().unwrap_or(0.0), actual == label))
                .collect()
        })
        .collect();
    let roc = per_label(&|i| roc_auc(&label_scores[i]));
    let pr = per_label(&|i| average_precision(&label_scores[i]));
    let roc_micro = frequency_weighted(&roc);
    let pr_micro = frequency_weighted(&pr);

    Ok(Statistics {
        counts: Counts {
            labels: per_label_u64(label_set, &actual_counts),
            n,
            predictions: LabelMap::from_fn(label_set, |l| {
                per_label_u64(label_set, &confusion[index_of(l).unwrap()])
            }),
        },
        precision: summary(precision, ratio(correct, n)),
        recall: summary(recall, ratio(correct, n)),
        pr_auc: summary(pr, pr_micro),
        roc_auc: summary(roc, roc_micro),
        thresholds: LabelMap::from_fn(label_set, |l| {
            ThresholdTable::from_scores(&label_scores[index_of(l).unwrap()])
        }),
    })
}

fn per_label_u64(label_set: &[ClassLabel], values: &[u64]) -> LabelMap<u64> {
    label_set.iter().cloned().zip(values.iter().copied()).collect()
}

/// Index of the most probable class; ties go to the earlier label.
pub fn argmax_index(probs: &LabelMap<f64>, label_set: &[ClassLabel]) -> usize {
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for (i, label) in label_set.iter().enumerate() {
        let p = probs.get(label).copied().unwrap_or(0.0);
        if p > best_p {
            best = i;
            best_p = p;
        }
    }
    best
}
