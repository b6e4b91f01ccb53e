use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value as Json;
use tempfile::TempDir;

struct Project {
    _dir: TempDir,
    root: PathBuf,
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wikiscore"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("WIKISCORE_FIXTURES")
        .output()
        .unwrap()
}

fn code(output: &Output) -> i32 {
    output.status.code().unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn json(output: &Output) -> Json {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(output)))
}

/// A project generated and built through the command line.
fn project() -> &'static Project {
    static PROJECT: OnceLock<Project> = OnceLock::new();
    PROJECT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let generated = run(&root, &["generate_fixtures", ".", "--edits", "400", "--articles-per-class", "15"]);
        assert_eq!(code(&generated), 0, "{generated:?}");
        assert!(stdout(&generated).contains("damaging train   320"));
        let built = run(&root, &["build", "manifest.jsonl"]);
        assert_eq!(code(&built), 0, "{built:?}");
        assert_eq!(stdout(&built).matches(" built ").count(), 3, "{}", stdout(&built));
        Project { _dir: dir, root }
    })
}

fn first_test_revision(root: &Path) -> String {
    let text = std::fs::read_to_string(root.join("labels/enwiki.damaging.test.jsonl")).unwrap();
    let record: Json = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    record["rev_id"].to_string()
}

#[test]
fn usage_errors_exit_2() {
    let dir = std::env::temp_dir();
    assert_eq!(code(&run(&dir, &[])), 2);
    assert_eq!(code(&run(&dir, &["frobnicate"])), 2);
    assert_eq!(code(&run(&dir, &["cv_train", "GradientBoosting"])), 2);
    assert_eq!(code(&run(&dir, &["generate_fixtures", "x", "--damaging-rate", "2"])), 2);
    assert_eq!(code(&run(&dir, &["fetch_labels", "-o", "x.jsonl"])), 2);
}

#[test]
fn domain_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(dir.path(), &["model_info", "nope.model"]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: "));
    std::fs::write(dir.path().join("bad.model"), "not a model").unwrap();
    assert_eq!(code(&run(dir.path(), &["model_info", "bad.model"])), 1);
    assert_eq!(code(&run(dir.path(), &["build", "manifest.jsonl"])), 1);
}

#[test]
fn rebuilds_are_no_ops() {
    let root = &project().root;
    let again = run(root, &["build", "manifest.jsonl"]);
    assert_eq!(code(&again), 0);
    assert_eq!(stdout(&again).matches("up-to-date").count(), 3, "{}", stdout(&again));
}

#[test]
fn model_info_prints_json() {
    let root = &project().root;
    let whole = run(root, &["model_info", "models/enwiki.damaging.model"]);
    assert_eq!(code(&whole), 0);
    let whole = json(&whole);
    assert_eq!(whole["type"], "GradientBoosting");
    assert_eq!(whole["version"], "0.4.0");
    assert!(whole["statistics"]["roc_auc"]["micro"].is_number());

    let params = json(&run(root, &["model_info", "models/enwiki.damaging.model", "params"]));
    assert_eq!(params["n_estimators"], 80);

    let query = "statistics.thresholds.true.'maximum filter_rate @ recall >= 0.75'";
    let row = json(&run(root, &["model_info", "models/enwiki.damaging.model", query]));
    assert!(row["recall"].as_f64().unwrap() >= 0.75, "{row}");

    let malformed = run(root, &["model_info", "models/enwiki.damaging.model", "statistics.thresholds.true.'maximum'"]);
    assert_eq!(code(&malformed), 2);
}

#[test]
fn training_from_the_command_line() {
    let root = &project().root;
    let out = root.join("cli_trained.model");
    let trained = run(
        root,
        &[
            "cv_train",
            "GradientBoosting",
            "feature_sets/enwiki.damaging.json",
            "damaging",
            "-i",
            "datasets/enwiki.damaging.w_cache.jsonl",
            "-o",
            out.to_str().unwrap(),
            "-p",
            "learning_rate=0.01",
            "-p",
            "max_depth=7",
            "-p",
            "n_estimators=700",
            "-p",
            "max_features=\"log2\"",
            "--label-weight",
            "5",
            "--pop-rate",
            "true=0.034",
            "--pop-rate",
            "false=0.966",
            "--center",
            "--scale",
            "--version",
            "0.3.0",
        ],
    );
    assert_eq!(code(&trained), 0, "{trained:?}");
    assert!(stdout(&trained).contains("micro    roc_auc="));

    let params = json(&run(root, &["model_info", out.to_str().unwrap(), "params"]));
    assert_eq!(params["n_estimators"], 700);
    assert_eq!(params["max_depth"], 7);
    assert_eq!(params["learning_rate"], 0.01);
    assert_eq!(params["max_features"], "log2");
    assert_eq!(params["label_weights"]["true"], 5.0);
    assert_eq!(params["population_rates"]["false"], 0.966);
    assert_eq!(params["center"], true);

    let tested = run(root, &["test_model", out.to_str().unwrap(), "-i", "datasets/enwiki.damaging.w_cache.jsonl"]);
    assert_eq!(code(&tested), 0);
    assert!(json(&tested)["roc_auc"]["micro"].as_f64().unwrap() > 0.5);

    let bad_kind = run(root, &["cv_train", "Perceptron", "f", "damaging", "-i", "x", "-o", "y"]);
    assert_eq!(code(&bad_kind), 2);
    let bad_weight = run(
        root,
        &[
            "cv_train",
            "GradientBoosting",
            "feature_sets/enwiki.damaging.json",
            "damaging",
            "-i",
            "datasets/enwiki.damaging.w_cache.jsonl",
            "-o",
            "z.model",
            "--label-weight",
            "heavy",
        ],
    );
    assert_eq!(code(&bad_weight), 2);
}

#[test]
fn scoring_from_the_command_line() {
    let root = &project().root;
    let rev = first_test_revision(root);
    let base = ["score", "--fixtures", "fixtures", "--models-dir", "models"];
    let scored = run(root, &[&base[..], &["enwiki", &rev, "--models", "damaging", "--features"]].concat());
    assert_eq!(code(&scored), 0, "{scored:?}");
    let body = json(&scored);
    let cell = &body["enwiki"]["scores"][&rev]["damaging"];
    assert!(cell["score"]["probability"]["true"].is_number());
    assert_eq!(cell["features"].as_object().unwrap().len(), 12);

    let injected =
        run(root, &[&base[..], &["enwiki", &rev, "--models", "damaging", "--inject", "feature.revision.user.is_anon=yes"]].concat());
    assert_eq!(code(&injected), 2);
    assert_eq!(code(&run(root, &[&base[..], &["xxwiki", &rev]].concat())), 1);
    assert_eq!(code(&run(root, &[&base[..], &["enwiki", &rev, "--inject", "novalue"]].concat())), 2);
}

#[test]
fn labels_and_extraction_from_the_command_line() {
    let root = &project().root;
    let converted = run(
        root,
        &[
            "fetch_labels",
            "--trace",
            "traces/enwiki.assessments.jsonl",
            "--label-set",
            "FA,GA,B,C,Start,Stub",
            "--campaign-id",
            "enwiki/assessments",
            "-o",
            "cli_quality.jsonl",
        ],
    );
    assert_eq!(code(&converted), 0, "{converted:?}");
    assert_eq!(
        std::fs::read(root.join("cli_quality.jsonl")).unwrap(),
        std::fs::read(root.join("labels/enwiki.articlequality.jsonl")).unwrap()
    );

    let copied = run(root, &["fetch_labels", "labels/enwiki.damaging.test.jsonl", "-o", "cli_test.jsonl"]);
    assert_eq!(code(&copied), 0);
    let extract = [
        "extract",
        "--labels",
        "cli_test.jsonl",
        "--feature-set",
        "feature_sets/enwiki.damaging.json",
        "--fixtures",
        "fixtures",
        "-o",
        "cli_test.w_cache.jsonl",
    ];
    let first = run(root, &extract);
    assert_eq!(code(&first), 0, "{first:?}");
    assert!(stdout(&first).contains(" 0 reused"));
    let second = run(root, &extract);
    assert!(stdout(&second).contains(" 0 extracted"), "{}", stdout(&second));

    let audit = run(
        root,
        &["audit", "--model", "models/enwiki.damaging.model", "--labels", "cli_test.jsonl", "--fixtures", "fixtures", "--run", "anon"],
    );
    assert_eq!(code(&audit), 0);
    assert!(stdout(&audit).contains("# anon n=80 "));
    let bad_run = run(
        root,
        &["audit", "--model", "models/enwiki.damaging.model", "--labels", "cli_test.jsonl", "--fixtures", "fixtures", "--run", "x"],
    );
    assert_eq!(code(&bad_run), 2);
}
