#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use tempfile::TempDir;
use wikiscore::pipeline::{build, generate_fixtures, BuildOptions, ExtractOptions, Manifest, PipelineError, TargetOutcome};
use wikiscore_core::datasources::FixtureClient;
use wikiscore_core::model_store::ModelRegistry;
use wikiscore_core::runtime::{ScoringService, ServiceConfig};
use wikiscore_core::synthetic::CorpusConfig;

pub const CTX: &str = "enwiki";

pub fn small_corpus() -> CorpusConfig {
    CorpusConfig { edit_quality_size: 400, article_quality_per_class: 15, ..CorpusConfig::default() }
}

/// A generated and fully built project, shared by every test in a binary.
pub struct Demo {
    _dir: TempDir,
    pub root: PathBuf,
}

impl Demo {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn client(&self, latency: Duration) -> Arc<FixtureClient> {
        Arc::new(FixtureClient::load_dir(self.path("fixtures")).unwrap().with_latency(latency))
    }

    pub fn registry(&self) -> Arc<ModelRegistry> {
        Arc::new(ModelRegistry::load_dir(self.path("models")).unwrap())
    }

    pub fn service(&self, config: &ServiceConfig) -> Arc<ScoringService> {
        Arc::new(ScoringService::new(self.registry(), self.client(Duration::ZERO), config))
    }
}

pub fn build_dir(root: &Path) -> Result<Vec<TargetOutcome>, PipelineError> {
    let manifest = Manifest::load(root.join("manifest.jsonl"))?;
    let options = BuildOptions { fixtures: root.join("fixtures"), force: false, extract: ExtractOptions::default() };
    build(&manifest, &options)
}

pub fn fresh_project() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    generate_fixtures(&root, &small_corpus()).unwrap();
    (dir, root)
}

pub fn demo() -> &'static Demo {
    static DEMO: OnceLock<Demo> = OnceLock::new();
    DEMO.get_or_init(|| {
        let (dir, root) = fresh_project();
        build_dir(&root).unwrap();
        Demo { _dir: dir, root }
    })
}
