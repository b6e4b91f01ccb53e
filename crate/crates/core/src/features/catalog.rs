//! The reference feature catalog: root datasources over a revision record
//! and twelve features over revision text and editor metadata.

use std::sync::{Arc, LazyLock};

use regex::Regex;

use super::graph::{DependencyGraph, DependentRef, RootField};
use super::lexicon::Lexicon;
use super::value::{Value, ValueType};
use super::tokenize;

pub const TEXT: &str = "revision.text";
pub const PARENT_TEXT: &str = "revision.parent_text";
pub const TIMESTAMP: &str = "revision.timestamp";
pub const USER_IS_ANON: &str = "user.is_anon";
pub const USER_ACCOUNT_AGE: &str = "user.account_age_seconds";

pub const INFORMAL_LEXICON: &str = "informal_words";
pub const BADWORDS_LEXICON: &str = "badwords";

/// Names of every catalog feature, in catalog order.
pub const FEATURE_NAMES: [&str; 12] = [
    "words_count",
    "chars_count",
    "informal_word_count",
    "badwords_count",
    "refs_count",
    "headers_count",
    "images_count",
    "categories_count",
    "markup_chars",
    "bytes_changed",
    "revision.user.is_anon",
    "revision.user.account_age_seconds",
];

static REF_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<ref[\s>/]").unwrap());
static HEADER_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^=+[^=\n].*=+[ \t]*$").unwrap());
static IMAGE_LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\[\[\s*(?:file|image)\s*:").unwrap());
static CATEGORY_LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\[\[\s*category\s*:").unwrap());

const MARKUP_CHARS: &[char] = &['[', ']', '{', '}', '|', '=', '<', '>', '\'', '*', '#'];

fn text_arg(values: &[Value], i: usize) -> Result<&str, String> {
    values
        .get(i)
        .and_then(Value::as_text)
        .ok_or_else(|| format!("argument {i} is not text"))
}

fn count_regex(re: &'static Regex) -> impl Fn(&[Value]) -> Result<Value, String> {
    move |v| Ok(Value::Int(re.find_iter(text_arg(v, 0)?).count() as i64))
}

pub fn words_count(text: &str) -> i64 {
    tokenize(text).count() as i64
}

pub fn chars_count(text: &str) -> i64 {
    text.chars().count() as i64
}

pub fn markup_chars(text: &str) -> i64 {
    text.chars().filter(|c| MARKUP_CHARS.contains(c)).count() as i64
}

/// Builds the full catalog graph. Lexicon-backed features use `informal`
/// and `badwords`.
pub fn reference_graph(informal: Lexicon, badwords: Lexicon) -> DependencyGraph {
    let informal = Arc::new(informal);
    let badwords = Arc::new(badwords);
    let nodes = vec![
        DependentRef::root(TEXT, RootField::Text, ValueType::Text),
        DependentRef::root(PARENT_TEXT, RootField::ParentText, ValueType::Text),
        DependentRef::root(TIMESTAMP, RootField::Timestamp, ValueType::Integer),
        DependentRef::root(USER_IS_ANON, RootField::UserIsAnon, ValueType::Boolean),
        DependentRef::root(USER_ACCOUNT_AGE, RootField::UserAccountAgeSeconds, ValueType::Integer),
        DependentRef::feature("words_count", ValueType::Integer, &[TEXT], |v| {
            Ok(Value::Int(words_count(text_arg(v, 0)?)))
        }),
        DependentRef::feature("chars_count", ValueType::Integer, &[TEXT], |v| {
            Ok(Value::Int(chars_count(text_arg(v, 0)?)))
        }),
        DependentRef::feature("informal_word_count", ValueType::Integer, &[TEXT], move |v| {
            Ok(Value::Int(informal.count_matches(text_arg(v, 0)?)))
        }),
        DependentRef::feature("badwords_count", ValueType::Integer, &[TEXT], move |v| {
            Ok(Value::Int(badwords.count_matches(text_arg(v, 0)?)))
        }),
        DependentRef::feature("refs_count", ValueType::Integer, &[TEXT], count_regex(&REF_TAG)),
        DependentRef::feature("headers_count", ValueType::Integer, &[TEXT], count_regex(&HEADER_LINE)),
        DependentRef::feature("images_count", ValueType::Integer, &[TEXT], count_regex(&IMAGE_LINK)),
        DependentRef::feature("categories_count", ValueType::Integer, &[TEXT], count_regex(&CATEGORY_LINK)),
        DependentRef::feature("markup_chars", ValueType::Integer, &[TEXT], |v| {
            Ok(Value::Int(markup_chars(text_arg(v, 0)?)))
        }),
        DependentRef::feature("bytes_changed", ValueType::Integer, &[TEXT, PARENT_TEXT], |v| {
            let now = text_arg(v, 0)?.len() as i64;
            let before = text_arg(v, 1)?.len() as i64;
            Ok(Value::Int(now - before))
        }),
        DependentRef::feature("revision.user.is_anon", ValueType::Boolean, &[USER_IS_ANON], |v| {
            Ok(v[0].clone())
        }),
        DependentRef::feature(
            "revision.user.account_age_seconds",
            ValueType::Integer,
            &[USER_ACCOUNT_AGE],
            |v| Ok(v[0].clone()),
        ),
    ];
    let mut graph = DependencyGraph::new();
    for node in nodes {
        graph.register(node).expect("reference catalog is a valid DAG");
    }
    graph
}
