use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use wikiscore_core::datasources::FixtureClient;
use wikiscore_core::estimators::{EstimatorKind, EstimatorParams, DEFAULT_FOLDS};
use wikiscore_core::features::FeatureSet;
use wikiscore_core::model_store::{ScoringModel, Version};
use wikiscore_core::ClassLabel;

use super::dataset::{extract, Dataset, ExtractOptions};
use super::labels::LabelFile;
use super::train::{cv_train, TrainOptions};
use super::{io_error, read_text, write_text, PipelineError};

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

/// One model to build. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildTarget {
    pub name: String,
    pub labels: PathBuf,
    pub feature_set: PathBuf,
    pub estimator: String,
    #[serde(default)]
    pub params: BTreeMap<String, Json>,
    pub version: String,
    #[serde(default)]
    pub pop_rates: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub label_weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub center: bool,
    #[serde(default)]
    pub scale: bool,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub target_class: Option<String>,
    /// Defaults to `models/<name>.model`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Defaults to `datasets/<name>.w_cache.jsonl`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
}

impl BuildTarget {
    pub fn params(&self) -> Result<EstimatorParams, PipelineError> {
        let kind: EstimatorKind = self.estimator.parse()?;
        Ok(EstimatorParams {
            kind,
            hyperparameters: self.params.clone(),
            label_weights: self.label_weights.clone(),
            population_rates: self.pop_rates.clone(),
            center: self.center,
            scale: self.scale,
            seed: self.seed,
        })
    }

    pub fn version(&self) -> Result<Version, PipelineError> {
        self.version
            .parse()
            .map_err(|e| PipelineError::Manifest(format!("target {:?}: bad version: {e}", self.name)))
    }

    pub fn output_path(&self, root: &Path) -> PathBuf {
        root.join(self.output.clone().unwrap_or_else(|| PathBuf::from(format!("models/{}.model", self.name))))
    }

    pub fn dataset_path(&self, root: &Path) -> PathBuf {
        root.join(
            self.dataset.clone().unwrap_or_else(|| PathBuf::from(format!("datasets/{}.w_cache.jsonl", self.name))),
        )
    }
}

/// Ordered build targets, one JSON object per line.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub targets: Vec<BuildTarget>,
}

impl Manifest {
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut targets: Vec<BuildTarget> = Vec::new();
        let mut names = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let target: BuildTarget = serde_json::from_str(trimmed)
                .map_err(|e| PipelineError::Manifest(format!("line {}: {e}", i + 1)))?;
            target.params()?;
            target.version()?;
            if !names.insert(target.name.clone()) {
                return Err(PipelineError::Manifest(format!("line {}: duplicate target {:?}", i + 1, target.name)));
            }
            targets.push(target);
        }
        Ok(Self { root: root.into(), targets })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let root = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::parse(&read_text(path)?, root)
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub fixtures: PathBuf,
    /// Rebuild every target regardless of staleness.
    pub force: bool,
    pub extract: ExtractOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetStatus {
    Built,
    UpToDate,
}

#[derive(Debug, Clone)]
pub struct TargetOutcome {
    pub name: String,
    pub status: TargetStatus,
    pub output: PathBuf,
    pub version: Version,
    pub n: u64,
    pub roc_auc: f64,
    pub pr_auc: f64,
}

impl TargetOutcome {
    fn of(name: &str, status: TargetStatus, output: PathBuf, model: &ScoringModel) -> Self {
        let stats = &model.info.statistics;
        Self {
            name: name.to_string(),
            status,
            output,
            version: model.version(),
            n: stats.counts.n,
            roc_auc: stats.roc_auc.micro_avg,
            pr_auc: stats.pr_auc.micro_avg,
        }
    }

    /// Aligned table of build results.
    pub fn render_table(outcomes: &[TargetOutcome]) -> String {
        let mut out = format!("{:<24} {:<10} {:<8} {:>6} {:>8} {:>8}  {}\n", "target", "status", "version", "n", "roc_auc", "pr_auc", "output");
        for o in outcomes {
            let status = match o.status {
                TargetStatus::Built => "built",
                TargetStatus::UpToDate => "up-to-date",
            };
            let _ = writeln!(
                out,
                "{:<24} {:<10} {:<8} {:>6} {:>8.4} {:>8.4}  {}",
                o.name,
                status,
                o.version.to_string(),
                o.n,
                o.roc_auc,
                o.pr_auc,
                o.output.display()
            );
        }
        out
    }
}

fn stamp_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".stamp");
    output.with_file_name(name)
}

fn modified(path: &Path) -> Result<SystemTime, PipelineError> {
    fs::metadata(path).and_then(|m| m.modified()).map_err(|e| io_error(path, e))
}

fn fixture_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Every file a target's model depends on.
fn input_files(target: &BuildTarget, root: &Path, fixtures: &[PathBuf]) -> Result<Vec<PathBuf>, PipelineError> {
    let feature_set_path = root.join(&target.feature_set);
    let set = FeatureSet::load(&feature_set_path)?;
    let set_dir = feature_set_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut files = vec![root.join(&target.labels), feature_set_path];
    files.extend(set.lexicons.values().map(|l| set_dir.join(&l.reference)));
    files.extend(fixtures.iter().cloned());
    Ok(files)
}

fn input_hash(target: &BuildTarget, files: &[PathBuf]) -> Result<String, PipelineError> {
    let mut hasher = Sha256::new();
    hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
    hasher.update(serde_json::to_string(target).expect("target serializes").as_bytes());
    for file in files {
        let bytes = fs::read(file).map_err(|e| io_error(file, e))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn up_to_date(output: &Path, hash: &str, files: &[PathBuf]) -> Result<bool, PipelineError> {
    let Ok(stamp) = fs::read_to_string(stamp_path(output)) else { return Ok(false) };
    if stamp.trim() != hash || !output.exists() {
        return Ok(false);
    }
    let built = modified(output)?;
    for file in files {
        if modified(file)? > built {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Builds every stale target in manifest order. A target is stale when its
/// stamp, output or dataset is missing or an input changed. The first
/// failure aborts the build.
pub fn build(manifest: &Manifest, options: &BuildOptions) -> Result<Vec<TargetOutcome>, PipelineError> {
    let fixtures = fixture_files(&options.fixtures)?;
    let mut client: Option<FixtureClient> = None;
    let mut outcomes = Vec::new();
    for target in &manifest.targets {
        let wrap = |source: PipelineError| PipelineError::Target { target: target.name.clone(), source: Box::new(source) };
        let files = input_files(target, &manifest.root, &fixtures).map_err(wrap)?;
        let hash = input_hash(target, &files).map_err(wrap)?;
        let output = target.output_path(&manifest.root);
        let fresh = target.dataset_path(&manifest.root).exists() && up_to_date(&output, &hash, &files).map_err(wrap)?;
        if !options.force && fresh {
            let model = ScoringModel::load(&output).map_err(|e| wrap(e.into()))?;
            log::info!("{}: up to date", target.name);
            outcomes.push(TargetOutcome::of(&target.name, TargetStatus::UpToDate, output, &model));
            continue;
        }
        if client.is_none() {
            client = Some(FixtureClient::load_dir(&options.fixtures).map_err(|e| wrap(e.into()))?);
        }
        let client = client.as_ref().expect("loaded above");
        let model = build_target(target, &manifest.root, client, options).map_err(wrap)?;
        model.save(&output).map_err(|e| wrap(e.into()))?;
        write_text(&stamp_path(&output), &format!("{hash}\n")).map_err(wrap)?;
        log::info!("{}: built {}", target.name, output.display());
        outcomes.push(TargetOutcome::of(&target.name, TargetStatus::Built, output, &model));
    }
    Ok(outcomes)
}

fn build_target(
    target: &BuildTarget,
    root: &Path,
    client: &FixtureClient,
    options: &BuildOptions,
) -> Result<ScoringModel, PipelineError> {
    let labels = LabelFile::read(root.join(&target.labels))?;
    let feature_set = FeatureSet::load(root.join(&target.feature_set))?;
    let dataset_path = target.dataset_path(root);
    let previous = dataset_path.exists().then(|| Dataset::read(&dataset_path)).transpose().ok().flatten();
    let (dataset, report) = extract(&labels, &feature_set, client, previous.as_ref(), &options.extract)?;
    dataset.write(&dataset_path)?;
    report.check(options.extract.tolerance)?;
    let train = TrainOptions {
        params: target.params()?,
        folds: target.folds,
        version: target.version()?,
        target_class: target.target_class.as_deref().map(ClassLabel::from_key),
    };
    cv_train(&dataset, &feature_set, &target.name, &train)
}
