#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use wikiscore_core::datasources::FixtureClient;
use wikiscore_core::estimators::{Estimator, EstimatorKind, EstimatorParams, LabeledDataset};
use wikiscore_core::features::catalog::FEATURE_NAMES;
use wikiscore_core::features::{ExtractionContext, FeatureSet, InjectionOverlay, RecordSource};
use wikiscore_core::model_store::{compute_statistics, Environment, ModelInfo, ModelRegistry, ScoringModel};
use wikiscore_core::runtime::{ScoringService, ServiceConfig};
use wikiscore_core::synthetic::{generate, Corpus, CorpusConfig};
use wikiscore_core::ClassLabel;

pub const CTX: &str = "enwiki";
pub const CONTENT_FEATURES: [&str; 4] = ["words_count", "chars_count", "refs_count", "markup_chars"];

pub fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        generate(&CorpusConfig { edit_quality_size: 300, article_quality_per_class: 5, ..CorpusConfig::default() })
    })
}

pub fn edit_ids() -> Vec<u64> {
    corpus().damaging.iter().map(|(rev, _)| *rev).collect()
}

pub fn client(latency: Duration) -> Arc<FixtureClient> {
    Arc::new(FixtureClient::from_records(corpus().revisions.clone()).with_latency(latency))
}

fn train(name: &str, kind: EstimatorKind, features: &[&str], version: &str) -> ScoringModel {
    let feature_set = FeatureSet::from_catalog(name, CTX, features, BTreeMap::new()).unwrap();
    let graph = feature_set.build_graph().unwrap();
    let names = feature_set.feature_names();
    let source = FixtureClient::from_records(corpus().revisions.clone());
    let overlay = InjectionOverlay::empty();
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    for (rev, damaging) in &corpus().damaging {
        let mut cx = ExtractionContext::new(&graph, CTX, *rev, RecordSource::Client(&source), &overlay);
        rows.push(cx.extract_many(&names).unwrap().iter().map(|v| v.as_f64().unwrap()).collect());
        labels.push(ClassLabel::Bool(*damaging));
    }
    let label_set = vec![ClassLabel::Bool(true), ClassLabel::Bool(false)];
    let data = LabeledDataset::new(names, label_set.clone(), rows, labels).unwrap();
    let mut params = EstimatorParams::new(kind);
    params.center = true;
    params.scale = true;
    if kind == EstimatorKind::GradientBoosting {
        params = params.with("n_estimators", 20).with("max_depth", 3);
    }
    let estimator = Estimator::train(&data, &params).unwrap();
    let predictions: Vec<_> =
        data.features.iter().zip(&data.labels).map(|(r, l)| (estimator.predict_proba(r).unwrap(), l.clone())).collect();
    let info = ModelInfo {
        model_type: kind.type_name().to_string(),
        version: version.parse().unwrap(),
        environment: Environment::current(),
        params: params.info_json(&label_set).unwrap(),
        statistics: compute_statistics(&predictions, &label_set).unwrap(),
    };
    ScoringModel::new(name, ClassLabel::Bool(true), feature_set, estimator, info).unwrap()
}

/// A boosted model over every catalog feature.
pub fn damaging() -> ScoringModel {
    static MODEL: OnceLock<ScoringModel> = OnceLock::new();
    MODEL.get_or_init(|| train("damaging", EstimatorKind::GradientBoosting, &FEATURE_NAMES, "0.4.0")).clone()
}

/// A linear model that only reads revision text.
pub fn content() -> ScoringModel {
    static MODEL: OnceLock<ScoringModel> = OnceLock::new();
    MODEL.get_or_init(|| train("content", EstimatorKind::LinearLogistic, &CONTENT_FEATURES, "0.1.0")).clone()
}

pub fn registry() -> Arc<ModelRegistry> {
    let registry = ModelRegistry::new();
    registry.insert(damaging());
    registry.insert(content());
    Arc::new(registry)
}

pub fn service(client: Arc<FixtureClient>, config: &ServiceConfig) -> ScoringService {
    ScoringService::new(registry(), client, config)
}
