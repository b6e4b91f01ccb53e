use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::Value as Json;
use wikiscore::api::{self, ScoresRequest};
use wikiscore::pipeline::{
    self, audit_model, build, cv_train, evaluate, extract, fetch_labels, generate_fixtures, AuditOptions, BuildOptions,
    Dataset, ExtractOptions, LabelFile, Manifest, PipelineError, TargetOutcome, TrainOptions,
};
use wikiscore_core::datasources::{DatasourceClient, FixtureClient, FIXTURES_ENV};
use wikiscore_core::estimators::{EstimatorKind, EstimatorParams, DEFAULT_FOLDS};
use wikiscore_core::features::FeatureSet;
use wikiscore_core::model_store::{ModelRegistry, ScoringModel, Version};
use wikiscore_core::runtime::{open_event_source, run_precacher, PrecacheConfig, ScoringService, ServiceConfig};
use wikiscore_core::scoring::{AuditRun, EngineConfig};
use wikiscore_core::synthetic::CorpusConfig;
use wikiscore_core::ClassLabel;

#[derive(Parser)]
#[command(name = "wikiscore", version, about = "Revision scoring service and model build pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP scoring service.
    Serve(ServeArgs),
    /// Score revisions locally and print the API response.
    Score(ScoreArgs),
    /// Validate a label export (or convert an assessment trace) into a label file.
    #[command(name = "fetch_labels")]
    FetchLabels(FetchLabelsArgs),
    /// Extract feature values for every labeled revision.
    Extract(ExtractArgs),
    /// Cross-validate, train on all rows and write a model file.
    #[command(name = "cv_train")]
    CvTrain(CvTrainArgs),
    /// Fitness statistics of a model on a labeled dataset.
    #[command(name = "test_model")]
    TestModel(TestModelArgs),
    /// Print a model's info document, or one field of it.
    #[command(name = "model_info")]
    ModelInfo(ModelInfoArgs),
    /// Histogram of a model's scores with injected feature values.
    Audit(AuditArgs),
    /// Build every stale target of a manifest.
    Build(BuildArgs),
    /// Write a synthetic demo project (fixtures, labels, feature sets, manifest).
    #[command(name = "generate_fixtures")]
    GenerateFixtures(GenerateArgs),
}

#[derive(Args, Clone)]
struct ServiceArgs {
    /// Directory of revision fixture files (*.jsonl).
    #[arg(long, env = FIXTURES_ENV)]
    fixtures: PathBuf,
    /// Directory of *.model files.
    #[arg(long)]
    models_dir: PathBuf,
    /// Score cache entries; 0 disables caching.
    #[arg(long, default_value_t = wikiscore_core::runtime::DEFAULT_CACHE_CAPACITY)]
    cache_capacity: usize,
    #[arg(long)]
    io_workers: Option<usize>,
    #[arg(long)]
    cpu_workers: Option<usize>,
    /// Pending tasks per worker pool before single scores are shed.
    #[arg(long)]
    queue_capacity: Option<usize>,
    /// Per-score time budget in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Simulated datasource latency in milliseconds.
    #[arg(long, default_value_t = 0)]
    latency_ms: u64,
}

impl ServiceArgs {
    fn config(&self) -> ServiceConfig {
        let mut engine = EngineConfig::default();
        if let Some(n) = self.io_workers {
            engine.io_workers = n.max(1);
        }
        if let Some(n) = self.cpu_workers {
            engine.cpu_workers = n.max(1);
        }
        if let Some(n) = self.queue_capacity {
            engine.queue_capacity = n.max(1);
        }
        if let Some(ms) = self.timeout_ms {
            engine.timeout = Duration::from_millis(ms);
        }
        ServiceConfig { engine, cache_capacity: self.cache_capacity }
    }

    fn service(&self) -> Result<Arc<ScoringService>, Failure> {
        let registry = Arc::new(ModelRegistry::load_dir(&self.models_dir).map_err(domain)?);
        log::info!("loaded {} models from {}", registry.len(), self.models_dir.display());
        let client = FixtureClient::load_dir(&self.fixtures)
            .map_err(domain)?
            .with_latency(Duration::from_millis(self.latency_ms));
        let client: Arc<dyn DatasourceClient> = Arc::new(client);
        Ok(Arc::new(ScoringService::new(registry, client, &self.config())))
    }
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    service: ServiceArgs,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Change-event stream to precache from: a file, `-` for stdin, or tcp://host:port.
    #[arg(long)]
    precache_source: Option<String>,
    /// context → model → event types; defaults to every model on revision-create.
    #[arg(long)]
    precache_config: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    precache_queue: usize,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    service: ServiceArgs,
    context: String,
    /// Revision ids, pipe- or space-separated.
    #[arg(required = true)]
    revids: Vec<String>,
    /// Models, pipe-separated; all models of the context by default.
    #[arg(long)]
    models: Option<String>,
    /// Attach solved feature values.
    #[arg(long)]
    features: bool,
    /// Inject a value: feature.<name>=<value> or datasource.<name>=<value>.
    #[arg(long = "inject", value_name = "NAME=VALUE")]
    inject: Vec<String>,
    /// Score the same request this many times (exercises the cache).
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Print the metrics exposition after scoring.
    #[arg(long)]
    metrics: bool,
}

#[derive(Args)]
struct FetchLabelsArgs {
    /// Label export: path, file:// URL, or http(s):// URL under --mirror.
    source: Option<String>,
    #[arg(short, long)]
    output: PathBuf,
    /// Local mirror directory for http(s) sources.
    #[arg(long)]
    mirror: Option<PathBuf>,
    /// Read an assessment-event trace instead of a label export.
    #[arg(long, conflicts_with = "source")]
    trace: Option<PathBuf>,
    /// Label set for --trace, comma-separated.
    #[arg(long, requires = "trace")]
    label_set: Option<String>,
    #[arg(long, default_value = "trace")]
    campaign_id: String,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    feature_set: PathBuf,
    #[arg(long, env = FIXTURES_ENV)]
    fixtures: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Largest tolerated share of failed rows.
    #[arg(long, default_value_t = pipeline::DEFAULT_FAILURE_TOLERANCE)]
    tolerance: f64,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CvTrainArgs {
    /// Estimator: GradientBoosting or LogisticRegression (dotted paths accepted).
    kind: String,
    /// Feature-set file.
    feature_set: PathBuf,
    /// Label (and model) name, e.g. damaging.
    label: String,
    #[arg(short = 'i', long = "input")]
    input: PathBuf,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    /// Hyperparameter, key=value with a JSON value.
    #[arg(short = 'p', value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// label=weight, or a bare weight for the target class.
    #[arg(long)]
    label_weight: Vec<String>,
    /// label=rate of the deployment population.
    #[arg(long)]
    pop_rate: Vec<String>,
    #[arg(long)]
    center: bool,
    #[arg(long)]
    scale: bool,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "0.1.0")]
    version: String,
    /// Class reported by audits; `true` or the first label by default.
    #[arg(long)]
    target_class: Option<String>,
}

#[derive(Args)]
struct TestModelArgs {
    model: PathBuf,
    #[arg(short = 'i', long = "input")]
    input: PathBuf,
}

#[derive(Args)]
struct ModelInfoArgs {
    model: PathBuf,
    /// Dotted field path; a quoted last segment is a threshold query.
    field_path: Option<String>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    model: PathBuf,
    /// Label file listing the revisions to score.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, env = FIXTURES_ENV)]
    fixtures: PathBuf,
    /// natural, anon, newcomer, or all.
    #[arg(long, default_value = "all")]
    run: String,
    /// Extra injected value applied to every run: NAME=VALUE.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    /// Only audit revisions carrying this label.
    #[arg(long)]
    only_label: Option<String>,
}

#[derive(Args)]
struct BuildArgs {
    manifest: PathBuf,
    /// Fixture directory; defaults to `fixtures/` beside the manifest.
    #[arg(long, env = FIXTURES_ENV)]
    fixtures: Option<PathBuf>,
    /// Rebuild every target.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = pipeline::DEFAULT_FAILURE_TOLERANCE)]
    tolerance: f64,
}

#[derive(Args)]
struct GenerateArgs {
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Edit-quality revisions.
    #[arg(long, default_value_t = 2000)]
    edits: usize,
    #[arg(long, default_value_t = 100)]
    articles_per_class: usize,
    #[arg(long, default_value_t = 0.3)]
    damaging_rate: f64,
}

/// A failed command and its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure { code: 1, message: e.to_string() }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidFlag(m) => usage(m),
            other => domain(other),
        }
    }
}

fn split_pair(raw: &str) -> Result<(String, String), Failure> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| usage(format!("expected NAME=VALUE, got {raw:?}")))
}

fn print_json(value: &Json) {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(a) => serve(a),
        Command::Score(a) => score(a),
        Command::FetchLabels(a) => fetch(a),
        Command::Extract(a) => extract_cmd(a),
        Command::CvTrain(a) => cv_train_cmd(a),
        Command::TestModel(a) => test_model(a),
        Command::ModelInfo(a) => model_info(a),
        Command::Audit(a) => audit(a),
        Command::Build(a) => build_cmd(a),
        Command::GenerateFixtures(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let service = args.service.service()?;
    if let Some(spec) = &args.precache_source {
        let config = match &args.precache_config {
            Some(path) => PrecacheConfig::load(path).map_err(domain)?,
            None => PrecacheConfig::all_models(service.registry(), &["revision-create"]),
        };
        config.validate(service.registry()).map_err(domain)?;
        let source = open_event_source(spec).map_err(domain)?;
        let precacher = run_precacher(source, config, Arc::clone(&service), args.precache_queue);
        std::thread::spawn(move || {
            let report = precacher.join();
            log::info!("precache source exhausted: {report:?}");
        });
    }
    let runtime = tokio::runtime::Runtime::new().map_err(domain)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await.map_err(domain)?;
        log::info!("listening on http://{}", listener.local_addr().map_err(domain)?);
        api::serve(listener, service).await.map_err(domain)
    })
}

fn score(args: ScoreArgs) -> Result<(), Failure> {
    let service = args.service.service()?;
    let mut query: Vec<(String, String)> = vec![("revids".into(), args.revids.join("|"))];
    if let Some(models) = &args.models {
        query.push(("models".into(), models.clone()));
    }
    if args.features {
        query.push(("features".into(), String::new()));
    }
    for pair in &args.inject {
        query.push(split_pair(pair)?);
    }
    let query = url::form_urlencoded::Serializer::new(String::new()).extend_pairs(&query).finish();
    let request = ScoresRequest::parse(&args.context, None, None, Some(&query)).map_err(|e| usage(e.message))?;
    for i in 0..args.repeat.max(1) {
        let body = api::respond(&service, &request).map_err(|e| Failure {
            code: if e.status == 404 { 1 } else { 2 },
            message: format!("{}: {}", e.error_type, e.message),
        })?;
        if i == 0 {
            print_json(&body);
        }
    }
    if args.metrics {
        print!("{}", service.metrics_text());
    }
    Ok(())
}

fn fetch(args: FetchLabelsArgs) -> Result<(), Failure> {
    let labels = match (&args.source, &args.trace) {
        (_, Some(trace)) => {
            let set = args.label_set.as_deref().ok_or_else(|| usage("--trace needs --label-set"))?;
            let set: Vec<ClassLabel> = set.split(',').map(|s| ClassLabel::from_key(s.trim())).collect();
            let text = std::fs::read_to_string(trace).map_err(|e| domain(format!("{}: {e}", trace.display())))?;
            let (labels, skipped) = pipeline::convert_trace(&text, &args.campaign_id, &set)?;
            eprintln!("skipped {skipped} assessments outside the label set");
            labels
        }
        (Some(source), None) => fetch_labels(source, args.mirror.as_deref())?,
        (None, None) => return Err(usage("give a label source or --trace")),
    };
    labels.write(&args.output)?;
    println!("{} labels ({}) → {}", labels.len(), labels.header.campaign_id, args.output.display());
    Ok(())
}

fn extract_cmd(args: ExtractArgs) -> Result<(), Failure> {
    let labels = LabelFile::read(&args.labels)?;
    let feature_set = FeatureSet::load(&args.feature_set).map_err(domain)?;
    let client = FixtureClient::load_dir(&args.fixtures).map_err(domain)?;
    let previous = args.output.exists().then(|| Dataset::read(&args.output).ok()).flatten();
    let mut options = ExtractOptions { tolerance: args.tolerance, ..Default::default() };
    if let Some(n) = args.workers {
        options.workers = n.max(1);
    }
    let (dataset, report) = extract(&labels, &feature_set, &client, previous.as_ref(), &options)?;
    dataset.write(&args.output)?;
    println!(
        "{} rows: {} extracted, {} reused, {} failed → {}",
        report.total,
        report.extracted,
        report.reused,
        report.failures.len(),
        args.output.display()
    );
    report.check(args.tolerance)?;
    Ok(())
}

fn parse_json_value(raw: &str) -> Json {
    serde_json::from_str(raw).unwrap_or_else(|_| Json::String(raw.to_string()))
}

fn cv_train_cmd(args: CvTrainArgs) -> Result<(), Failure> {
    let kind: EstimatorKind = args.kind.parse().map_err(|e| usage(format!("{e}")))?;
    let version: Version = args.version.parse().map_err(|e| usage(format!("--version: {e}")))?;
    let feature_set = FeatureSet::load(&args.feature_set).map_err(domain)?;
    let dataset = Dataset::read(&args.input)?;
    let target_class = args.target_class.as_deref().map(ClassLabel::from_key);

    let mut params = EstimatorParams::new(kind);
    params.center = args.center;
    params.scale = args.scale;
    params.seed = args.seed;
    for raw in &args.params {
        let (key, value) = split_pair(raw)?;
        params.hyperparameters.insert(key, parse_json_value(&value));
    }
    let default_class = target_class
        .clone()
        .or_else(|| dataset.header.label_set.iter().find(|l| **l == ClassLabel::Bool(true)).cloned())
        .or_else(|| dataset.header.label_set.first().cloned())
        .ok_or_else(|| domain("dataset has an empty label set"))?;
    for raw in &args.label_weight {
        let (label, weight) = match raw.split_once('=') {
            Some((l, w)) => (l.trim().to_string(), w),
            None => (default_class.key(), raw.as_str()),
        };
        let weight: f64 = weight.trim().parse().map_err(|_| usage(format!("bad --label-weight {raw:?}")))?;
        params.label_weights.insert(label, weight);
    }
    if !args.pop_rate.is_empty() {
        let mut rates = std::collections::BTreeMap::new();
        for raw in &args.pop_rate {
            let (label, rate) = split_pair(raw)?;
            let rate: f64 = rate.trim().parse().map_err(|_| usage(format!("bad --pop-rate {raw:?}")))?;
            rates.insert(label, rate);
        }
        params.population_rates = Some(rates);
    }
    params.validate(&dataset.header.label_set).map_err(|e| usage(e.to_string()))?;

    let options = TrainOptions { params, folds: args.folds, version, target_class };
    let model = cv_train(&dataset, &feature_set, &args.label, &options)?;
    model.save(&args.output).map_err(domain)?;
    print_summary(&model);
    println!("wrote {}", args.output.display());
    Ok(())
}

fn print_summary(model: &ScoringModel) {
    let stats = &model.info.statistics;
    println!("{} {} ({}), n={}", model.name, model.version(), model.info.model_type, stats.counts.n);
    for (label, value) in stats.roc_auc.labels.iter() {
        let pr = stats.pr_auc.labels.get(label).copied().unwrap_or(0.0);
        println!("  {label:<8} roc_auc={value:.4} pr_auc={pr:.4}");
    }
    println!("  micro    roc_auc={:.4} pr_auc={:.4}", stats.roc_auc.micro_avg, stats.pr_auc.micro_avg);
}

fn load_model(path: &Path) -> Result<ScoringModel, Failure> {
    ScoringModel::load(path).map_err(domain)
}

fn test_model(args: TestModelArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?;
    let dataset = Dataset::read(&args.input)?;
    let statistics = evaluate(&model, &dataset)?;
    print_json(&serde_json::to_value(&statistics).expect("statistics serialize"));
    Ok(())
}

fn model_info(args: ModelInfoArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?;
    let info = model.model_info(args.field_path.as_deref()).map_err(|e| usage(e.to_string()))?;
    print_json(&info);
    Ok(())
}

fn audit(args: AuditArgs) -> Result<(), Failure> {
    let runs: Vec<AuditRun> = match args.run.as_str() {
        "all" => AuditRun::ALL.to_vec(),
        other => vec![other.parse().map_err(usage)?],
    };
    let extra: Vec<(String, String)> = args.set.iter().map(|s| split_pair(s)).collect::<Result<_, _>>()?;
    let model = Arc::new(load_model(&args.model)?);
    let labels = LabelFile::read(&args.labels)?;
    let wanted = args.only_label.as_deref().map(ClassLabel::from_key);
    let revisions: Vec<u64> = labels
        .records
        .iter()
        .filter(|r| wanted.as_ref().is_none_or(|w| r.label.key() == w.key()))
        .map(|r| r.rev_id)
        .collect();
    let client: Arc<dyn DatasourceClient> = Arc::new(FixtureClient::load_dir(&args.fixtures).map_err(domain)?);
    for run in runs {
        let mut overlay = run.overlay();
        overlay.extend(extra.iter().cloned());
        let options = AuditOptions { overlay, ..Default::default() };
        let summary = audit_model(Arc::clone(&model), Arc::clone(&client), &revisions, &options)?;
        print!("{}", summary.render_table(run.name()));
    }
    Ok(())
}

fn build_cmd(args: BuildArgs) -> Result<(), Failure> {
    let manifest = Manifest::load(&args.manifest)?;
    let fixtures = args.fixtures.unwrap_or_else(|| manifest.root.join("fixtures"));
    let mut extract = ExtractOptions { tolerance: args.tolerance, ..Default::default() };
    if let Some(n) = args.workers {
        extract.workers = n.max(1);
    }
    let outcomes = build(&manifest, &BuildOptions { fixtures, force: args.force, extract })?;
    print!("{}", TargetOutcome::render_table(&outcomes));
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&args.damaging_rate) {
        return Err(usage("--damaging-rate must lie in [0, 1]"));
    }
    let config = CorpusConfig {
        edit_quality_size: args.edits,
        article_quality_per_class: args.articles_per_class,
        damaging_rate: args.damaging_rate,
        seed: args.seed,
        ..Default::default()
    };
    let summary = generate_fixtures(&args.out, &config)?;
    println!("{summary}");
    println!("wrote {}", args.out.display());
    Ok(())
}
