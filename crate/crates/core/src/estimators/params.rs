use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::EstimatorError;
use crate::label::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    LinearLogistic,
    GradientBoosting,
}

impl EstimatorKind {
    /// Algorithm name reported as `type` in model info.
    pub fn type_name(self) -> &'static str {
        match self {
            EstimatorKind::LinearLogistic => "LogisticRegression",
            EstimatorKind::GradientBoosting => "GradientBoosting",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::LinearLogistic => "linear_logistic",
            EstimatorKind::GradientBoosting => "gradient_boosting",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let last = s.rsplit('.').next().unwrap_or(s);
        match last {
            "linear_logistic" | "LogisticRegression" | "linear" => Ok(EstimatorKind::LinearLogistic),
            "gradient_boosting" | "GradientBoosting" => Ok(EstimatorKind::GradientBoosting),
            other => Err(EstimatorError::InvalidParam(format!("unknown estimator kind {other:?}"))),
        }
    }
}

/// How many features a tree split may consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    All,
    /// ⌈log2(d)⌉ randomly chosen features per split.
    Log2,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::All => d,
            MaxFeatures::Log2 => (d as f64).log2().ceil() as usize,
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(n) => n,
        };
        m.clamp(1, d.max(1))
    }

    fn to_json(self) -> Json {
        match self {
            MaxFeatures::All => Json::Null,
            MaxFeatures::Log2 => Json::from("log2"),
            MaxFeatures::Sqrt => Json::from("sqrt"),
            MaxFeatures::Count(n) => Json::from(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingConfig {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            n_estimators: 100,
            max_depth: 3,
            max_features: MaxFeatures::All,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self { learning_rate: 0.5, iterations: 500, l2: 1e-3 }
    }
}

/// Training parameters. Hyperparameters are kept as given (JSON values) so
/// they echo back unchanged in model info; typed views validate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub kind: EstimatorKind,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, Json>,
    /// Label key → per-example loss multiplier. Missing labels weigh 1.
    #[serde(default)]
    pub label_weights: BTreeMap<String, f64>,
    /// Label key → deployment-population class rate.
    #[serde(default)]
    pub population_rates: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub center: bool,
    #[serde(default)]
    pub scale: bool,
    #[serde(default)]
    pub seed: u64,
}

impl EstimatorParams {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            hyperparameters: BTreeMap::new(),
            label_weights: BTreeMap::new(),
            population_rates: None,
            center: false,
            scale: false,
            seed: 0,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Json>) -> Self {
        self.hyperparameters.insert(key.to_string(), value.into());
        self
    }

    pub fn boosting(&self) -> Result<BoostingConfig, EstimatorError> {
        let mut cfg = BoostingConfig::default();
        for (key, value) in &self.hyperparameters {
            match key.as_str() {
                "learning_rate" => cfg.learning_rate = positive_f64(key, value)?,
                "n_estimators" => cfg.n_estimators = positive_usize(key, value)?,
                "max_depth" => cfg.max_depth = positive_usize(key, value)?,
                "min_samples_leaf" => cfg.min_samples_leaf = positive_usize(key, value)?,
                "max_features" => {
                    cfg.max_features = match value {
                        Json::Null => MaxFeatures::All,
                        Json::String(s) if s == "log2" => MaxFeatures::Log2,
                        Json::String(s) if s == "sqrt" => MaxFeatures::Sqrt,
                        v => MaxFeatures::Count(positive_usize(key, v)?),
                    }
                }
                other => return Err(unknown(self.kind, other)),
            }
        }
        Ok(cfg)
    }

    pub fn linear(&self) -> Result<LinearConfig, EstimatorError> {
        let mut cfg = LinearConfig::default();
        for (key, value) in &self.hyperparameters {
            match key.as_str() {
                "learning_rate" => cfg.learning_rate = positive_f64(key, value)?,
                "iterations" => cfg.iterations = positive_usize(key, value)?,
                "l2" => {
                    cfg.l2 = value
                        .as_f64()
                        .filter(|v| *v >= 0.0 && v.is_finite())
                        .ok_or_else(|| bad_value(key, value))?
                }
                other => return Err(unknown(self.kind, other)),
            }
        }
        Ok(cfg)
    }

    /// Validates hyperparameters, weights and rates against a label set.
    pub fn validate(&self, label_set: &[ClassLabel]) -> Result<(), EstimatorError> {
        match self.kind {
            EstimatorKind::LinearLogistic => self.linear().map(drop)?,
            EstimatorKind::GradientBoosting => self.boosting().map(drop)?,
        }
        for (key, weight) in &self.label_weights {
            if ClassLabel::resolve(key, label_set).is_none() {
                return Err(EstimatorError::InvalidParam(format!("label weight for unknown label {key:?}")));
            }
            if !(weight.is_finite() && *weight > 0.0) {
                return Err(EstimatorError::InvalidParam(format!("label weight {key}={weight} must be > 0")));
            }
        }
        if let Some(rates) = &self.population_rates {
            let covered = label_set.iter().all(|l| rates.contains_key(&l.key()));
            if !covered || rates.len() != label_set.len() {
                return Err(EstimatorError::InvalidParam(
                    "population rates must cover the label set exactly".into(),
                ));
            }
            if rates.values().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(EstimatorError::InvalidParam("population rates must lie in [0, 1]".into()));
            }
            let total: f64 = rates.values().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(EstimatorError::InvalidParam(format!("population rates sum to {total}, not 1")));
            }
        }
        Ok(())
    }

    pub fn label_weight(&self, label: &ClassLabel) -> f64 {
        self.label_weights.get(&label.key()).copied().unwrap_or(1.0)
    }

    /// The `params` block of model info: labels, every hyperparameter with
    /// defaults filled in, weights, rates and preprocessing flags.
    pub fn info_json(&self, label_set: &[ClassLabel]) -> Result<Json, EstimatorError> {
        let mut out = serde_json::Map::new();
        out.insert("labels".into(), serde_json::to_value(label_set).expect("labels serialize"));
        match self.kind {
            EstimatorKind::GradientBoosting => {
                let cfg = self.boosting()?;
                out.insert("learning_rate".into(), cfg.learning_rate.into());
                out.insert("max_depth".into(), cfg.max_depth.into());
                out.insert("max_features".into(), cfg.max_features.to_json());
                out.insert("min_samples_leaf".into(), cfg.min_samples_leaf.into());
                out.insert("n_estimators".into(), cfg.n_estimators.into());
            }
            EstimatorKind::LinearLogistic => {
                let cfg = self.linear()?;
                out.insert("iterations".into(), cfg.iterations.into());
                out.insert("l2".into(), cfg.l2.into());
                out.insert("learning_rate".into(), cfg.learning_rate.into());
            }
        }
        let weights: serde_json::Map<String, Json> =
            label_set.iter().map(|l| (l.key(), self.label_weight(l).into())).collect();
        out.insert("label_weights".into(), Json::Object(weights));
        let rates = match &self.population_rates {
            Some(rates) => Json::Object(
                label_set
                    .iter()
                    .map(|l| (l.key(), rates.get(&l.key()).copied().unwrap_or(0.0).into()))
                    .collect(),
            ),
            None => Json::Null,
        };
        out.insert("population_rates".into(), rates);
        out.insert("center".into(), self.center.into());
        out.insert("scale".into(), self.scale.into());
        out.insert("seed".into(), self.seed.into());
        Ok(Json::Object(out))
    }
}

fn unknown(kind: EstimatorKind, key: &str) -> EstimatorError {
    EstimatorError::InvalidParam(format!("{kind} does not accept parameter {key:?}"))
}

fn bad_value(key: &str, value: &Json) -> EstimatorError {
    EstimatorError::InvalidParam(format!("invalid value {value} for {key}"))
}

fn positive_f64(key: &str, value: &Json) -> Result<f64, EstimatorError> {
    value
        .as_f64()
        .filter(|v| *v > 0.0 && v.is_finite())
        .ok_or_else(|| bad_value(key, value))
}

fn positive_usize(key: &str, value: &Json) -> Result<usize, EstimatorError> {
    value
        .as_u64()
        .filter(|v| *v > 0)
        .map(|v| v as usize)
        .ok_or_else(|| bad_value(key, value))
}
