use std::sync::Arc;

use wikiscore_core::datasources::DatasourceClient;
use wikiscore_core::model_store::{ModelRegistry, ScoringModel};
use wikiscore_core::runtime::Metrics;
use wikiscore_core::scoring::{AuditSummary, EngineConfig, ScoringEngine};

use super::PipelineError;

#[derive(Debug, Clone, Default)]
pub struct AuditOptions {
    /// Injected `feature.*` / `datasource.*` values applied to every revision.
    pub overlay: Vec<(String, String)>,
    pub engine: EngineConfig,
}

/// Scores every revision under the overlay and summarizes the model's
/// target-class probability.
pub fn audit_model(
    model: Arc<ScoringModel>,
    client: Arc<dyn DatasourceClient>,
    revision_ids: &[u64],
    options: &AuditOptions,
) -> Result<AuditSummary, PipelineError> {
    let overlay = ScoringEngine::parse_overlay(&model, &options.overlay)
        .map_err(|e| PipelineError::InvalidFlag(format!("{}: {}", e.error_type, e.message)))?;
    let registry = Arc::new(ModelRegistry::new());
    registry.insert_arc(Arc::clone(&model));
    let engine = ScoringEngine::new(registry, client, &options.engine, Arc::new(Metrics::new()));
    Ok(engine.audit_inject(model, revision_ids, &overlay))
}
