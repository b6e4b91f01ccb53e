//! Per-label confusion tables over a fixed threshold grid.

use serde::{Deserialize, Serialize};

/// Number of grid points: thresholds 0.000, 0.001, ..., 1.000.
pub const GRID_POINTS: usize = 1001;

pub fn grid_threshold(i: usize) -> f64 {
    i as f64 / 1000.0
}

/// Confusion counts and derived metrics when items scoring at or above
/// `threshold` are flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub f1: f64,
    pub filter_rate: f64,
    pub fpr: f64,
    pub match_rate: f64,
    pub precision: f64,
    pub recall: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ThresholdRow {
    /// Derives every metric from confusion counts. Undefined ratios
    /// (empty denominators) are 0.
    pub fn from_counts(threshold: f64, tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        let n = tp + fp + tn + fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        let filter_rate = ratio(tn + fn_, n);
        Self {
            threshold,
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, n),
            f1,
            filter_rate,
            fpr: ratio(fp, fp + tn),
            match_rate: 1.0 - filter_rate,
            precision,
            recall,
        }
    }

    fn same_confusion(&self, other: &Self) -> bool {
        (self.tp, self.fp, self.tn, self.fn_) == (other.tp, other.fp, other.tn, other.fn_)
    }
}

/// Rows in strictly increasing threshold order. Runs of grid points with
/// identical confusion counts collapse into one row carrying the run's
/// greatest threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdTable {
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    /// Builds the table from `(score, is_positive)` pairs.
    pub fn from_scores(scores: &[(f64, bool)]) -> Self {
        let mut pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
        let mut neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        let mut rows: Vec<ThresholdRow> = Vec::new();
        for i in 0..GRID_POINTS {
            let t = grid_threshold(i);
            let fn_ = pos.partition_point(|&s| s < t) as u64;
            let tn = neg.partition_point(|&s| s < t) as u64;
            let row = ThresholdRow::from_counts(t, pos.len() as u64 - fn_, neg.len() as u64 - tn, tn, fn_);
            match rows.last_mut() {
                Some(last) if last.same_confusion(&row) => last.threshold = t,
                _ => rows.push(row),
            }
        }
        Self { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Checks ordering and monotonicity invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        for pair in self.rows.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.threshold <= a.threshold {
                return Err(format!("thresholds not increasing at {}", b.threshold));
            }
            if b.recall > a.recall {
                return Err(format!("recall increases at {}", b.threshold));
            }
            if b.filter_rate < a.filter_rate {
                return Err(format!("filter_rate decreases at {}", b.threshold));
            }
        }
        for row in &self.rows {
            let n = row.tp + row.fp + row.tn + row.fn_;
            if (row.filter_rate - ratio(row.tn + row.fn_, n)).abs() > 1e-12
                || (row.match_rate - (1.0 - row.filter_rate)).abs() > 1e-12
            {
                return Err(format!("inconsistent rates at {}", row.threshold));
            }
            let metrics = [row.precision, row.recall, row.fpr, row.accuracy, row.f1, row.filter_rate, row.match_rate];
            if metrics.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(format!("metric out of range at {}", row.threshold));
            }
        }
        Ok(())
    }
}
