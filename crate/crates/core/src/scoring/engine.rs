use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use indexmap::IndexMap;

use super::audit::AuditSummary;
use super::document::{ErrorDocument, ErrorType, FeatureValues, ScoreDocument, ScoreResult};
use crate::datasources::{DatasourceClient, FetchResult, RevisionRecord};
use crate::features::{ExtractionContext, InjectionOverlay, RecordSource};
use crate::model_store::{ModelRegistry, ScoringModel};
use crate::runtime::{Metrics, TaskHandle, WorkerPool};

pub const DEFAULT_SCORE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub io_workers: usize,
    pub cpu_workers: usize,
    /// Pending tasks per pool before new single scores are shed.
    pub queue_capacity: usize,
    pub timeout: Duration,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let cpus = std::thread::available_parallelism().map_or(4, |n| n.get());
        Self { io_workers: 8, cpu_workers: cpus, queue_capacity: 1024, timeout: DEFAULT_SCORE_TIMEOUT }
    }
}

/// Raw injection pairs as they arrive from a URL or the command line.
pub type OverlayPairs = [(String, String)];

/// Batch results: revision → model → outcome, in request order.
pub type BatchScores = IndexMap<u64, IndexMap<String, ScoreResult>>;

/// Turns revisions into score documents. Fetches run on the IO pool and
/// extraction plus prediction on the CPU pool.
pub struct ScoringEngine {
    registry: Arc<ModelRegistry>,
    client: Arc<dyn DatasourceClient>,
    io: WorkerPool,
    cpu: WorkerPool,
    metrics: Arc<Metrics>,
    timeout: Duration,
}

fn remaining(deadline: Instant) -> Duration {
    deadline.saturating_duration_since(Instant::now())
}

/// Extracts the model's features for one revision and applies the model.
pub fn compute_document(
    model: &ScoringModel,
    record: Arc<RevisionRecord>,
    overlay: &InjectionOverlay,
    include_features: bool,
    metrics: &Metrics,
) -> ScoreResult {
    metrics.feature_extractions.inc();
    let revision_id = record.revision_id;
    let mut cx =
        ExtractionContext::new(model.graph(), &model.context, revision_id, RecordSource::Prefetched(record), overlay);
    let names = model.feature_names();
    let values = cx.extract_many(names)?;
    let inputs = names
        .iter()
        .zip(&values)
        .map(|(name, v)| {
            v.as_f64().ok_or_else(|| {
                ErrorDocument::new(ErrorType::FeatureExtractionError, format!("feature {name:?} is not numeric"))
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let probability = model
        .predict(&inputs)
        .map_err(|e| ErrorDocument::new(ErrorType::InternalError, e.to_string()))?;
    let features = include_features.then(|| {
        names
            .iter()
            .zip(values)
            .map(|(name, v)| (format!("feature.{name}"), v))
            .collect::<FeatureValues>()
    });
    Ok(ScoreDocument::new(probability, features))
}

impl ScoringEngine {
    pub fn new(
        registry: Arc<ModelRegistry>,
        client: Arc<dyn DatasourceClient>,
        config: &EngineConfig,
        metrics: Arc<Metrics>,
    ) -> Self {
        Self {
            registry,
            client,
            io: WorkerPool::new("io", config.io_workers, config.queue_capacity),
            cpu: WorkerPool::new("cpu", config.cpu_workers, config.queue_capacity),
            metrics,
            timeout: config.timeout,
        }
    }

    pub fn registry(&self) -> &Arc<ModelRegistry> {
        &self.registry
    }

    pub fn metrics(&self) -> &Arc<Metrics> {
        &self.metrics
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn model(&self, context: &str, name: &str) -> Result<Arc<ScoringModel>, ErrorDocument> {
        self.registry.get(context, name).ok_or_else(|| {
            ErrorDocument::new(ErrorType::ModelNotFound, format!("no model {name:?} in context {context:?}"))
        })
    }

    /// Type-checks raw injection pairs against a model's dependency graph.
    pub fn parse_overlay(model: &ScoringModel, pairs: &OverlayPairs) -> Result<InjectionOverlay, ErrorDocument> {
        InjectionOverlay::parse(model.graph(), pairs.iter().map(|(k, v)| (k, v))).map_err(ErrorDocument::from)
    }

    pub fn score_one(
        &self,
        context: &str,
        model_name: &str,
        revision_id: u64,
        overlay: &OverlayPairs,
        include_features: bool,
    ) -> ScoreResult {
        let model = self.model(context, model_name)?;
        let overlay = Self::parse_overlay(&model, overlay)?;
        self.score_model(model, revision_id, overlay, include_features)
    }

    /// Scores one revision with an already resolved model, within the
    /// configured time budget.
    pub fn score_model(
        &self,
        model: Arc<ScoringModel>,
        revision_id: u64,
        overlay: InjectionOverlay,
        include_features: bool,
    ) -> ScoreResult {
        let deadline = Instant::now() + self.timeout;
        let client = Arc::clone(&self.client);
        let context = model.context.clone();
        let record = self
            .io
            .try_execute(move || client.get_revision(&context, revision_id))?
            .wait_timeout(remaining(deadline))??;
        let metrics = Arc::clone(&self.metrics);
        self.cpu
            .try_execute(move || compute_document(&model, record, &overlay, include_features, &metrics))?
            .wait_timeout(remaining(deadline))?
    }

    /// One batched fetch for all `revision_ids`, keyed by id.
    fn fetch_batch(&self, context: &str, revision_ids: Vec<u64>) -> Result<HashMap<u64, FetchResult>, ErrorDocument> {
        if revision_ids.is_empty() {
            return Ok(HashMap::new());
        }
        let client = Arc::clone(&self.client);
        let context = context.to_string();
        let handle = self.io.execute(move || {
            client
                .get_revisions_batch(&context, &revision_ids)
                .map(|results| revision_ids.into_iter().zip(results).collect::<HashMap<_, _>>())
        });
        Ok(handle.wait_timeout(self.timeout)??)
    }

    /// Scores arbitrary (revision, model) cells of one context: a single
    /// batched fetch, then extraction fanned out over the CPU pool. Results
    /// follow the order of `cells`.
    pub fn score_cells(&self, context: &str, cells: &[(u64, String)], include_features: bool) -> Vec<ScoreResult> {
        let mut models: HashMap<&str, Result<Arc<ScoringModel>, ErrorDocument>> = HashMap::new();
        for (_, name) in cells {
            models.entry(name.as_str()).or_insert_with(|| self.model(context, name));
        }
        let mut wanted: Vec<u64> = Vec::new();
        for (rev, name) in cells {
            if models[name.as_str()].is_ok() && !wanted.contains(rev) {
                wanted.push(*rev);
            }
        }
        let fetched = self.fetch_batch(context, wanted);

        enum Pending {
            Done(ScoreResult),
            Running(TaskHandle<ScoreResult>),
        }
        let pending: Vec<Pending> = cells
            .iter()
            .map(|(rev, name)| {
                let model = match &models[name.as_str()] {
                    Ok(m) => Arc::clone(m),
                    Err(e) => return Pending::Done(Err(e.clone())),
                };
                let record = match &fetched {
                    Err(e) => return Pending::Done(Err(e.clone())),
                    Ok(map) => match &map[rev] {
                        Err(e) => return Pending::Done(Err(e.clone().into())),
                        Ok(r) => Arc::clone(r),
                    },
                };
                let metrics = Arc::clone(&self.metrics);
                Pending::Running(self.cpu.execute(move || {
                    compute_document(&model, record, &InjectionOverlay::empty(), include_features, &metrics)
                }))
            })
            .collect();
        pending
            .into_iter()
            .map(|p| match p {
                Pending::Done(r) => r,
                Pending::Running(handle) => handle.wait_timeout(self.timeout).unwrap_or_else(|e| Err(e.into())),
            })
            .collect()
    }

    /// Every model applied to every revision.
    pub fn score_batch(
        &self,
        context: &str,
        model_names: &[String],
        revision_ids: &[u64],
        include_features: bool,
    ) -> BatchScores {
        let revisions = unique(revision_ids);
        let names = unique(model_names);
        let cells: Vec<(u64, String)> =
            revisions.iter().flat_map(|&r| names.iter().map(move |m| (r, m.clone()))).collect();
        let mut results = self.score_cells(context, &cells, include_features).into_iter();
        revisions
            .iter()
            .map(|&rev| (rev, names.iter().map(|m| (m.clone(), results.next().expect("one result per cell"))).collect()))
            .collect()
    }

    /// Scores `revision_ids` under `overlay` and summarizes the
    /// distribution of the model's target-class probability.
    pub fn audit_inject(&self, model: Arc<ScoringModel>, revision_ids: &[u64], overlay: &InjectionOverlay) -> AuditSummary {
        let mut summary = AuditSummary::new();
        let fetched = match self.fetch_batch(&model.context, unique(revision_ids)) {
            Ok(f) => f,
            Err(e) => {
                summary.record_error(e.error_type, revision_ids.len() as u64);
                return summary;
            }
        };
        let handles: Vec<Result<TaskHandle<ScoreResult>, ErrorDocument>> = revision_ids
            .iter()
            .map(|rev| {
                let record = fetched[rev].clone().map_err(ErrorDocument::from)?;
                let (model, overlay, metrics) = (Arc::clone(&model), overlay.clone(), Arc::clone(&self.metrics));
                Ok(self.cpu.execute(move || compute_document(&model, record, &overlay, false, &metrics)))
            })
            .collect();
        for handle in handles {
            let result = handle.and_then(|h| h.wait_timeout(self.timeout).unwrap_or_else(|e| Err(e.into())));
            match result {
                Ok(doc) => summary.record(doc.probability.get(&model.target_label).copied().unwrap_or(0.0)),
                Err(e) => summary.record_error(e.error_type, 1),
            }
        }
        summary.finish();
        summary
    }
}

fn unique<T: Clone + PartialEq + std::hash::Hash + Eq>(items: &[T]) -> Vec<T> {
    let mut seen = std::collections::HashSet::new();
    items.iter().filter(|i| seen.insert((*i).clone())).cloned().collect()
}
