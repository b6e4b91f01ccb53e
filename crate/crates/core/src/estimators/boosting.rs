//! Gradient-boosted regression trees on the log-odds scale.
//!
//! Binary problems fit one score function (log-odds of the first class);
//! problems with more classes fit one function per class and combine them
//! with a softmax. Each round fits a depth-limited regression tree to the
//! negative gradient and sets leaf values with a single Newton step.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::softmax;
use super::params::BoostingConfig;
use super::EstimatorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub classes: usize,
    pub learning_rate: f64,
    /// Initial score per score function.
    pub init: Vec<f64>,
    /// `rounds[r][k]` is the tree for score function `k` in round `r`.
    pub rounds: Vec<Vec<RegressionTree>>,
}

/// Inputs shared by every tree of one fit.
struct TreeInputs<'a> {
    columns: &'a [Vec<f64>],
    presorted: &'a [Vec<usize>],
    residual: &'a [f64],
    weight: &'a [f64],
    hessian: &'a [f64],
    leaf_scale: f64,
    cfg: &'a BoostingConfig,
}

impl BoostedModel {
    /// Fits the model and returns it with the weighted training deviance
    /// after each round (index 0 is the deviance of the initial scores).
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        sample_weights: &[f64],
        classes: usize,
        cfg: &BoostingConfig,
        seed: u64,
    ) -> Result<(Self, Vec<f64>), EstimatorError> {
        let n = x.len();
        let dim = x.first().map_or(0, Vec::len);
        let functions = if classes == 2 { 1 } else { classes };
        let total_weight: f64 = sample_weights.iter().sum();

        let mut class_weight = vec![0.0; classes];
        for (&c, &w) in y.iter().zip(sample_weights) {
            class_weight[c] += w;
        }
        let init: Vec<f64> = if functions == 1 {
            vec![(class_weight[0] / class_weight[1]).ln()]
        } else {
            class_weight.iter().map(|w| (w / total_weight).max(1e-12).ln()).collect()
        };
        if init.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::DegenerateData("a class has no training weight".into()));
        }

        let columns: Vec<Vec<f64>> = (0..dim).map(|j| x.iter().map(|r| r[j]).collect()).collect();
        let presorted: Vec<Vec<usize>> = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut scores: Vec<Vec<f64>> = vec![init.clone(); n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self { classes, learning_rate: cfg.learning_rate, init, rounds: Vec::new() };
        let mut trace = vec![deviance(&model, &scores, y, sample_weights, total_weight)];

        for round in 0..cfg.n_estimators {
            let probs: Vec<Vec<f64>> = scores.iter().map(|s| model.link(s)).collect();
            let mut trees = Vec::with_capacity(functions);
            for k in 0..functions {
                // Score function k tracks class k (binary: class 0).
                let residual: Vec<f64> = probs
                    .iter()
                    .zip(y)
                    .map(|(p, &c)| if c == k { 1.0 } else { 0.0 } - p[k])
                    .collect();
                let hessian: Vec<f64> = if functions == 1 {
                    probs.iter().map(|p| p[0] * (1.0 - p[0])).collect()
                } else {
                    residual.iter().map(|r| r.abs() * (1.0 - r.abs())).collect()
                };
                let leaf_scale = if functions == 1 { 1.0 } else { (classes as f64 - 1.0) / classes as f64 };
                let inputs = TreeInputs {
                    columns: &columns,
                    presorted: &presorted,
                    residual: &residual,
                    weight: sample_weights,
                    hessian: &hessian,
                    leaf_scale,
                    cfg,
                };
                trees.push(grow_tree(&inputs, &mut rng));
            }
            for (row, s) in x.iter().zip(scores.iter_mut()) {
                for (k, tree) in trees.iter().enumerate() {
                    s[k] += cfg.learning_rate * tree.predict(row);
                }
            }
            model.rounds.push(trees);
            let dev = deviance(&model, &scores, y, sample_weights, total_weight);
            if !dev.is_finite() {
                return Err(EstimatorError::NonFiniteLoss { iteration: round });
            }
            trace.push(dev);
        }
        Ok((model, trace))
    }

    fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = self.init.clone();
        for trees in &self.rounds {
            for (k, tree) in trees.iter().enumerate() {
                s[k] += self.learning_rate * tree.predict(row);
            }
        }
        s
    }

    fn link(&self, scores: &[f64]) -> Vec<f64> {
        if scores.len() == 1 {
            let p = 1.0 / (1.0 + (-scores[0]).exp());
            vec![p, 1.0 - p]
        } else {
            softmax(scores)
        }
    }

    pub fn predict(&self, row: &[f64]) -> Vec<f64> {
        self.link(&self.raw_scores(row))
    }
}

fn deviance(model: &BoostedModel, scores: &[Vec<f64>], y: &[usize], w: &[f64], total: f64) -> f64 {
    scores
        .iter()
        .zip(y)
        .zip(w)
        .map(|((s, &c), &wi)| -wi * model.link(s)[c].max(1e-300).ln())
        .sum::<f64>()
        / total
}

fn grow_tree(inputs: &TreeInputs<'_>, rng: &mut ChaCha8Rng) -> RegressionTree {
    let mut nodes = Vec::new();
    let mut goes_left = vec![false; inputs.residual.len()];
    build_node(inputs, inputs.presorted.to_vec(), 0, &mut nodes, &mut goes_left, rng);
    RegressionTree { nodes }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Builds the subtree for the rows in `sorted` (one ascending row list per
/// feature) and returns its node index.
fn build_node(
    inputs: &TreeInputs<'_>,
    sorted: Vec<Vec<usize>>,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
    goes_left: &mut [bool],
    rng: &mut ChaCha8Rng,
) -> usize {
    let rows = &sorted[0];
    let index = nodes.len();
    nodes.push(TreeNode::Leaf { value: leaf_value(inputs, rows) });

    let cfg = inputs.cfg;
    if depth >= cfg.max_depth || rows.len() < 2 * cfg.min_samples_leaf {
        return index;
    }
    let Some(split) = best_split(inputs, &sorted, rng) else {
        return index;
    };

    for &r in rows {
        goes_left[r] = inputs.columns[split.feature][r] <= split.threshold;
    }
    let (left_sorted, right_sorted): (Vec<_>, Vec<_>) = sorted
        .into_iter()
        .map(|list| list.into_iter().partition::<Vec<usize>, _>(|&r| goes_left[r]))
        .unzip();
    let left = build_node(inputs, left_sorted, depth + 1, nodes, goes_left, rng);
    let right = build_node(inputs, right_sorted, depth + 1, nodes, goes_left, rng);
    nodes[index] = TreeNode::Split { feature: split.feature, threshold: split.threshold, left, right };
    index
}

fn leaf_value(inputs: &TreeInputs<'_>, rows: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &r in rows {
        num += inputs.weight[r] * inputs.residual[r];
        den += inputs.weight[r] * inputs.hessian[r];
    }
    if den.abs() < 1e-150 {
        0.0
    } else {
        inputs.leaf_scale * num / den
    }
}

/// Weighted squared-error split search over a random feature subset.
fn best_split(inputs: &TreeInputs<'_>, sorted: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Option<Split> {
    let dim = sorted.len();
    let m = inputs.cfg.max_features.resolve(dim);
    let mut candidates: Vec<usize> = if m >= dim { (0..dim).collect() } else { sample(rng, dim, m).into_vec() };
    candidates.sort_unstable();

    let min_leaf = inputs.cfg.min_samples_leaf;
    let (mut g_total, mut w_total) = (0.0, 0.0);
    for &r in &sorted[0] {
        g_total += inputs.weight[r] * inputs.residual[r];
        w_total += inputs.weight[r];
    }
    let parent = g_total * g_total / w_total;

    let mut best: Option<Split> = None;
    for feature in candidates {
        let col = &inputs.columns[feature];
        let list = &sorted[feature];
        let (mut g_left, mut w_left) = (0.0, 0.0);
        for i in 0..list.len() - 1 {
            let r = list[i];
            g_left += inputs.weight[r] * inputs.residual[r];
            w_left += inputs.weight[r];
            let (here, next) = (col[r], col[list[i + 1]]);
            if here == next || i + 1 < min_leaf || list.len() - i - 1 < min_leaf {
                continue;
            }
            let (g_right, w_right) = (g_total - g_left, w_total - w_left);
            if w_left <= 0.0 || w_right <= 0.0 {
                continue;
            }
            let gain = g_left * g_left / w_left + g_right * g_right / w_right - parent;
            if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                let mid = here + (next - here) / 2.0;
                let threshold = if mid < next { mid } else { here };
                best = Some(Split { feature, threshold, gain });
            }
        }
    }
    best
}
