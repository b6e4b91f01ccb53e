//! Datasources and features as a declarative dependency graph, solved per
//! request with optional value injection.

pub mod catalog;
mod feature_set;
mod graph;
mod lexicon;
mod value;

pub use feature_set::{FeatureDecl, FeatureSet, FeatureSetError, LexiconSpec, FEATURE_SET_FORMAT};
pub use graph::{
    ComputeFn, DependencyGraph, DependentRef, ExtractionContext, FeatureError, InjectionOverlay, NodeKind,
    Provider, RecordSource, RootField,
};
pub use lexicon::{informal_word_count, Lexicon};
pub use value::{Value, ValueType};

/// Splits on whitespace and punctuation and lowercases each token.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}
