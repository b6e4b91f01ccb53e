use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;

use super::{io_error, ModelStoreError, ScoringModel, MODEL_EXTENSION};

type ContextModels = BTreeMap<String, Arc<ScoringModel>>;

/// Loaded models by context and name. Replacing a model is atomic: scores
/// already in flight keep the `Arc` they started with.
#[derive(Debug, Default)]
pub struct ModelRegistry {
    contexts: RwLock<BTreeMap<String, ContextModels>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.model` file in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, ModelStoreError> {
        let dir = dir.as_ref();
        let registry = Self::new();
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| io_error(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == MODEL_EXTENSION))
            .collect();
        paths.sort();
        for path in paths {
            registry.insert(ScoringModel::load(&path)?);
        }
        Ok(registry)
    }

    /// Registers or replaces a model, returning the one it replaced.
    pub fn insert(&self, model: ScoringModel) -> Option<Arc<ScoringModel>> {
        self.insert_arc(Arc::new(model))
    }

    pub fn insert_arc(&self, model: Arc<ScoringModel>) -> Option<Arc<ScoringModel>> {
        self.contexts
            .write()
            .entry(model.context.clone())
            .or_default()
            .insert(model.name.clone(), model)
    }

    pub fn get(&self, context: &str, name: &str) -> Option<Arc<ScoringModel>> {
        self.contexts.read().get(context).and_then(|m| m.get(name)).cloned()
    }

    pub fn has_context(&self, context: &str) -> bool {
        self.contexts.read().contains_key(context)
    }

    pub fn contexts(&self) -> Vec<String> {
        self.contexts.read().keys().cloned().collect()
    }

    /// Models of a context in name order.
    pub fn models(&self, context: &str) -> Vec<Arc<ScoringModel>> {
        self.contexts.read().get(context).map(|m| m.values().cloned().collect()).unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.contexts.read().values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
