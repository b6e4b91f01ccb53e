use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use crate::datasources::DatasourceClient;
use crate::features::InjectionOverlay;
use crate::model_store::{ModelRegistry, ScoringModel, Version};
use crate::scoring::{BatchScores, EngineConfig, ErrorDocument, OverlayPairs, ScoreDocument, ScoreResult, ScoringEngine};

use super::cache::{ScoreCache, DEFAULT_CACHE_CAPACITY};
use super::dedup::Singleflight;
use super::metrics::Metrics;

/// Deterministic name of a cacheable score: `context:model:version:revid`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScoreJobKey {
    pub context: String,
    pub model: String,
    pub version: Version,
    pub revision_id: u64,
}

impl ScoreJobKey {
    pub fn new(context: impl Into<String>, model: impl Into<String>, version: Version, revision_id: u64) -> Self {
        Self { context: context.into(), model: model.into(), version, revision_id }
    }

    pub fn for_model(model: &ScoringModel, revision_id: u64) -> Self {
        Self::new(&model.context, &model.name, model.version(), revision_id)
    }
}

impl fmt::Display for ScoreJobKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.context, self.model, self.version, self.revision_id)
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub engine: EngineConfig,
    /// 0 disables the score cache.
    pub cache_capacity: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { engine: EngineConfig::default(), cache_capacity: DEFAULT_CACHE_CAPACITY }
    }
}

/// The scoring engine behind an LRU score cache and in-flight
/// de-duplication. Cached documents always carry their features; they are
/// stripped on the way out unless requested.
pub struct ScoringService {
    engine: ScoringEngine,
    cache: ScoreCache<ScoreDocument>,
    flights: Singleflight<ScoreDocument, ErrorDocument>,
    metrics: Arc<Metrics>,
}

fn shape(doc: ScoreDocument, include_features: bool) -> ScoreDocument {
    if include_features {
        doc
    } else {
        doc.without_features()
    }
}

impl ScoringService {
    pub fn new(registry: Arc<ModelRegistry>, client: Arc<dyn DatasourceClient>, config: &ServiceConfig) -> Self {
        let metrics = Arc::new(Metrics::new());
        Self {
            engine: ScoringEngine::new(registry, client, &config.engine, Arc::clone(&metrics)),
            cache: ScoreCache::new(config.cache_capacity),
            flights: Singleflight::new(),
            metrics,
        }
    }

    pub fn engine(&self) -> &ScoringEngine {
        &self.engine
    }

    pub fn registry(&self) -> &Arc<ModelRegistry> {
        self.engine.registry()
    }

    pub fn metrics(&self) -> &Arc<Metrics> {
        &self.metrics
    }

    pub fn cache(&self) -> &ScoreCache<ScoreDocument> {
        &self.cache
    }

    /// Scores one revision. Injected requests go straight to the engine and
    /// never touch the cache or the in-flight registry.
    pub fn score(
        &self,
        context: &str,
        model_name: &str,
        revision_id: u64,
        overlay: &OverlayPairs,
        include_features: bool,
    ) -> ScoreResult {
        let started = Instant::now();
        self.metrics.scores_requested.inc();
        let result = self.score_uncounted(context, model_name, revision_id, overlay, include_features);
        self.metrics.score_duration.observe(started.elapsed());
        if let Err(e) = &result {
            self.metrics.record_error(e.error_type.as_str());
        }
        result
    }

    fn score_uncounted(
        &self,
        context: &str,
        model_name: &str,
        revision_id: u64,
        overlay: &OverlayPairs,
        include_features: bool,
    ) -> ScoreResult {
        let model = self.engine.model(context, model_name)?;
        if !overlay.is_empty() {
            let overlay = ScoringEngine::parse_overlay(&model, overlay)?;
            return self.engine.score_model(model, revision_id, overlay, include_features);
        }
        let key = ScoreJobKey::for_model(&model, revision_id).to_string();
        if let Some(doc) = self.cache.get(&key) {
            self.metrics.cache_hits.inc();
            return Ok(shape(doc, include_features));
        }
        self.metrics.cache_misses.inc();
        self.compute_shared(&key, model, revision_id).map(|doc| shape(doc, include_features))
    }

    /// Computes a score once per key across concurrent callers and caches
    /// successes.
    fn compute_shared(&self, key: &str, model: Arc<ScoringModel>, revision_id: u64) -> ScoreResult {
        let (result, merged) = self.flights.run(key, || {
            if let Some(doc) = self.cache.peek(key) {
                return Ok(doc);
            }
            let doc = self.engine.score_model(model, revision_id, InjectionOverlay::empty(), true)?;
            self.cache.put(key.to_string(), doc.clone());
            Ok(doc)
        });
        if merged {
            self.metrics.dedup_merges.inc();
        }
        result
    }

    /// Batch scoring through the cache: hits are served directly and all
    /// misses share one batched fetch.
    pub fn score_batch(
        &self,
        context: &str,
        model_names: &[String],
        revision_ids: &[u64],
        include_features: bool,
    ) -> BatchScores {
        let started = Instant::now();
        let revisions = unique(revision_ids);
        let names = unique(model_names);
        let mut cells: Vec<(u64, &String, Option<String>, Option<ScoreResult>)> = Vec::new();
        for &rev in &revisions {
            for name in &names {
                self.metrics.scores_requested.inc();
                let key = self.registry().get(context, name).map(|m| ScoreJobKey::for_model(&m, rev).to_string());
                let hit = key.as_deref().and_then(|k| self.cache.get(k));
                match (&key, &hit) {
                    (Some(_), Some(_)) => self.metrics.cache_hits.inc(),
                    (Some(_), None) => self.metrics.cache_misses.inc(),
                    _ => {}
                }
                cells.push((rev, name, key, hit.map(Ok)));
            }
        }
        let misses: Vec<(u64, String)> =
            cells.iter().filter(|c| c.3.is_none()).map(|c| (c.0, c.1.clone())).collect();
        let mut computed = self.engine.score_cells(context, &misses, true).into_iter();
        let mut scores = BatchScores::new();
        for (rev, name, key, hit) in cells {
            let result = hit.unwrap_or_else(|| {
                let result = computed.next().expect("one result per miss");
                match (&key, &result) {
                    (Some(key), Ok(doc)) => self.cache.put(key.clone(), doc.clone()),
                    (_, Err(e)) => self.metrics.record_error(e.error_type.as_str()),
                    _ => {}
                }
                result
            });
            scores.entry(rev).or_default().insert(name.clone(), result.map(|d| shape(d, include_features)));
        }
        self.metrics.score_duration.observe(started.elapsed());
        scores
    }

    /// Warms the cache for one revision. Counted as a precache request, not
    /// as an external lookup.
    pub fn precache(&self, context: &str, model_name: &str, revision_id: u64) -> ScoreResult {
        self.metrics.precache_requests.inc();
        let model = self.engine.model(context, model_name)?;
        let key = ScoreJobKey::for_model(&model, revision_id).to_string();
        if let Some(doc) = self.cache.peek(&key) {
            return Ok(doc);
        }
        self.compute_shared(&key, model, revision_id)
    }

    pub fn metrics_text(&self) -> String {
        self.metrics.render()
    }
}

fn unique<T: Clone + Eq + std::hash::Hash>(items: &[T]) -> Vec<T> {
    let mut seen = std::collections::HashSet::new();
    items.iter().filter(|i| seen.insert((*i).clone())).cloned().collect()
}
