use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde_json::json;
use wikiscore_core::datasources::write_fixture_file;
use wikiscore_core::features::catalog::{BADWORDS_LEXICON, FEATURE_NAMES, INFORMAL_LEXICON};
use wikiscore_core::features::{FeatureSet, LexiconSpec};
use wikiscore_core::synthetic::{generate, Corpus, CorpusConfig};
use wikiscore_core::ClassLabel;

use super::labels::{convert_trace, LabelFile, LabelFileHeader, LabelRecord, LabelSource};
use super::{io_error, write_text, PipelineError};

const QUALITY_FEATURES: [&str; 7] =
    ["words_count", "chars_count", "refs_count", "headers_count", "images_count", "categories_count", "markup_chars"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureSummary {
    pub revisions: usize,
    pub damaging_train: usize,
    pub damaging_test: usize,
    pub articlequality: usize,
    pub trace_events: usize,
    pub change_events: usize,
}

impl fmt::Display for FixtureSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "revisions        {}", self.revisions)?;
        writeln!(f, "damaging train   {}", self.damaging_train)?;
        writeln!(f, "damaging test    {}", self.damaging_test)?;
        writeln!(f, "articlequality   {}", self.articlequality)?;
        writeln!(f, "trace events     {}", self.trace_events)?;
        write!(f, "change events    {}", self.change_events)
    }
}

fn lexicon_spec(reference: &str, text: &str) -> LexiconSpec {
    let entries = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    LexiconSpec { reference: reference.to_string(), entries }
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

/// Writes a complete, self-contained project into `out`: revision fixtures,
/// label files (including one derived from an assessment trace), feature
/// sets with their lexicons, a change-event stream, a precache config and a
/// build manifest.
pub fn generate_fixtures(out: &Path, config: &CorpusConfig) -> Result<FixtureSummary, PipelineError> {
    let corpus = generate(config);
    let ctx = corpus.context.clone();

    let fixture_path = out.join(format!("fixtures/{ctx}.jsonl"));
    let fixture_dir = out.join("fixtures");
    fs::create_dir_all(&fixture_dir).map_err(|e| io_error(&fixture_dir, e))?;
    write_fixture_file(&fixture_path, corpus.revisions.iter()).map_err(|e| io_error(&fixture_path, e))?;
    write_text(&out.join("lexicons/informal.txt"), &Corpus::informal_lexicon())?;
    write_text(&out.join("lexicons/badwords.txt"), &Corpus::badwords_lexicon())?;

    let lexicons = BTreeMap::from([
        (INFORMAL_LEXICON.to_string(), lexicon_spec("../lexicons/informal.txt", &Corpus::informal_lexicon())),
        (BADWORDS_LEXICON.to_string(), lexicon_spec("../lexicons/badwords.txt", &Corpus::badwords_lexicon())),
    ]);
    let damaging_set = FeatureSet::from_catalog(format!("{ctx}.damaging"), &ctx, &FEATURE_NAMES, lexicons)?;
    write_text(&out.join(format!("feature_sets/{ctx}.damaging.json")), &pretty(&damaging_set.to_file_json()))?;
    let quality_set =
        FeatureSet::from_catalog(format!("{ctx}.articlequality"), &ctx, &QUALITY_FEATURES, BTreeMap::new())?;
    write_text(&out.join(format!("feature_sets/{ctx}.articlequality.json")), &pretty(&quality_set.to_file_json()))?;

    // Every fifth edit is held out for testing and audits.
    let (test, train): (Vec<_>, Vec<_>) = corpus.damaging.iter().enumerate().partition(|(i, _)| i % 5 == 4);
    let damaging_file = |campaign: &str, rows: Vec<(usize, &(u64, bool))>| {
        let records = rows
            .into_iter()
            .map(|(_, (rev, damaging))| LabelRecord { rev_id: *rev, label: ClassLabel::Bool(*damaging), context: ctx.clone() })
            .collect();
        let header = LabelFileHeader {
            campaign_id: campaign.to_string(),
            label_set: Corpus::damaging_label_set(),
            source: LabelSource::ManualCampaign,
        };
        LabelFile::new(header, records)
    };
    let train = damaging_file(&format!("{ctx}/damaging"), train)?;
    let test = damaging_file(&format!("{ctx}/damaging/test"), test)?;
    train.write(out.join(format!("labels/{ctx}.damaging.jsonl")))?;
    test.write(out.join(format!("labels/{ctx}.damaging.test.jsonl")))?;

    let trace = assessment_trace(&corpus);
    write_text(&out.join(format!("traces/{ctx}.assessments.jsonl")), &trace.join("\n"))?;
    let (quality, _) = convert_trace(&trace.join("\n"), &format!("{ctx}/assessments"), &Corpus::quality_label_set())?;
    quality.write(out.join(format!("labels/{ctx}.articlequality.jsonl")))?;

    let events = corpus.events(config.seed);
    write_text(&out.join(format!("events/{ctx}.events.jsonl")), &(events.join("\n") + "\n"))?;

    let precache = json!({ ctx.clone(): {
        "damaging": ["revision-create"],
        "damaging_linear": ["revision-create"],
    }});
    write_text(&out.join("precache.json"), &pretty(&precache))?;
    write_text(&out.join("manifest.jsonl"), &manifest(&ctx))?;

    Ok(FixtureSummary {
        revisions: corpus.revisions.len(),
        damaging_train: train.len(),
        damaging_test: test.len(),
        articlequality: quality.len(),
        trace_events: trace.len(),
        change_events: events.len(),
    })
}

/// Assessment history for the article-quality revisions: the final
/// assessment, an earlier superseded one for every third article, and
/// out-of-scale classes now and then.
fn assessment_trace(corpus: &Corpus) -> Vec<String> {
    let classes = Corpus::quality_label_set();
    let mut lines = Vec::new();
    for (i, (rev, class)) in corpus.article_quality.iter().enumerate() {
        let event = |assessment: &str, timestamp: i64| {
            json!({"context": corpus.context, "rev_id": rev, "assessment": assessment, "timestamp": timestamp}).to_string()
        };
        let t = 1_600_000_000 + i as i64 * 100;
        if i % 3 == 0 {
            let rank = classes.iter().position(|c| c == class).unwrap_or(0);
            let earlier = &classes[(rank + 1) % classes.len()];
            lines.push(event(&earlier.key(), t - 50));
        }
        if i % 20 == 0 {
            lines.push(event("List", t - 10));
        }
        lines.push(event(&class.key(), t));
    }
    lines
}

fn manifest(ctx: &str) -> String {
    let targets = [
        json!({
            "name": "damaging",
            "labels": format!("labels/{ctx}.damaging.jsonl"),
            "feature_set": format!("feature_sets/{ctx}.damaging.json"),
            "estimator": "GradientBoosting",
            "params": {"learning_rate": 0.1, "max_depth": 4, "max_features": "log2", "n_estimators": 80},
            "version": "0.4.0",
            "label_weights": {"true": 1.0},
            "center": true,
            "scale": true,
            "folds": 5,
            "seed": 0,
            "output": format!("models/{ctx}.damaging.model"),
            "dataset": format!("datasets/{ctx}.damaging.w_cache.jsonl"),
        }),
        json!({
            "name": "damaging_linear",
            "labels": format!("labels/{ctx}.damaging.jsonl"),
            "feature_set": format!("feature_sets/{ctx}.damaging.json"),
            "estimator": "LogisticRegression",
            "params": {"learning_rate": 0.5, "iterations": 300, "l2": 0.0001},
            "version": "0.1.0",
            "center": true,
            "scale": true,
            "folds": 5,
            "seed": 0,
            "output": format!("models/{ctx}.damaging_linear.model"),
            "dataset": format!("datasets/{ctx}.damaging.w_cache.jsonl"),
        }),
        json!({
            "name": "articlequality",
            "labels": format!("labels/{ctx}.articlequality.jsonl"),
            "feature_set": format!("feature_sets/{ctx}.articlequality.json"),
            "estimator": "GradientBoosting",
            "params": {"learning_rate": 0.1, "max_depth": 3, "n_estimators": 60},
            "version": "0.2.0",
            "center": true,
            "scale": true,
            "folds": 5,
            "seed": 0,
            "output": format!("models/{ctx}.articlequality.model"),
            "dataset": format!("datasets/{ctx}.articlequality.w_cache.jsonl"),
        }),
    ];
    targets.iter().map(|t| t.to_string() + "\n").collect()
}
