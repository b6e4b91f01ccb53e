//! Feature-set definition files.
//!
//! A feature set names the features one model consumes, in model-input
//! order, and references the lexicons its text features use:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "name": "enwiki.damaging",
//!   "context": "enwiki",
//!   "features": [
//!     {"name": "words_count", "type": "integer", "depends_on": ["revision.text"]},
//!     {"name": "revision.user.is_anon", "type": "boolean", "depends_on": ["user.is_anon"]}
//!   ],
//!   "lexicons": {"informal_words": "../lexicons/enwiki.informal.txt"}
//! }
//! ```
//!
//! Lexicon paths are relative to the feature-set file. Every declared
//! feature must exist in the reference catalog with the same type and
//! dependencies.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::{reference_graph, BADWORDS_LEXICON, INFORMAL_LEXICON};
use super::graph::{DependencyGraph, NodeKind};
use super::lexicon::Lexicon;
use super::value::ValueType;

pub const FEATURE_SET_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum FeatureSetError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed feature set: {0}")]
    Malformed(String),
    #[error("unsupported feature-set format version {0}")]
    UnsupportedVersion(u32),
    #[error("feature {0:?} is not in the reference catalog")]
    UnknownFeature(String),
    #[error("feature {name:?} declared as {declared}, catalog has {actual}")]
    DeclarationMismatch { name: String, declared: String, actual: String },
    #[error("lexicon {name:?}: {message}")]
    BadLexicon { name: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub value_type: ValueType,
    pub depends_on: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureSetFile {
    format_version: u32,
    name: String,
    context: String,
    features: Vec<FeatureDecl>,
    #[serde(default)]
    lexicons: BTreeMap<String, String>,
}

/// Lexicon as embedded in a feature set: where it came from plus its entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconSpec {
    pub reference: String,
    pub entries: Vec<String>,
}

/// A resolved, self-contained feature set (lexicon entries inlined).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub name: String,
    pub context: String,
    pub features: Vec<FeatureDecl>,
    pub lexicons: BTreeMap<String, LexiconSpec>,
}

impl FeatureSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureSetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| FeatureSetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let file: FeatureSetFile =
            serde_json::from_str(&text).map_err(|e| FeatureSetError::Malformed(e.to_string()))?;
        if file.format_version != FEATURE_SET_FORMAT {
            return Err(FeatureSetError::UnsupportedVersion(file.format_version));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let mut lexicons = BTreeMap::new();
        for (name, reference) in file.lexicons {
            let lexicon = Lexicon::load(name.clone(), &base.join(&reference))
                .map_err(|message| FeatureSetError::BadLexicon { name: name.clone(), message })?;
            lexicons.insert(name, LexiconSpec { reference, entries: lexicon.entries().to_vec() });
        }
        let set = FeatureSet {
            name: file.name,
            context: file.context,
            features: file.features,
            lexicons,
        };
        set.build_graph()?;
        Ok(set)
    }

    /// Declarations taken straight from the catalog for the given names.
    pub fn from_catalog(
        name: impl Into<String>,
        context: impl Into<String>,
        feature_names: &[&str],
        lexicons: BTreeMap<String, LexiconSpec>,
    ) -> Result<Self, FeatureSetError> {
        let graph = reference_graph(Lexicon::empty(INFORMAL_LEXICON), Lexicon::empty(BADWORDS_LEXICON));
        let features = feature_names
            .iter()
            .map(|n| {
                let node = graph
                    .get(n)
                    .filter(|node| node.kind == NodeKind::Feature)
                    .ok_or_else(|| FeatureSetError::UnknownFeature(n.to_string()))?;
                Ok(FeatureDecl {
                    name: node.name.clone(),
                    value_type: node.value_type,
                    depends_on: node.dependencies.clone(),
                })
            })
            .collect::<Result<_, FeatureSetError>>()?;
        Ok(Self { name: name.into(), context: context.into(), features, lexicons })
    }

    /// Serializes back to the on-disk format, given lexicon references.
    pub fn to_file_json(&self) -> serde_json::Value {
        serde_json::json!({
            "format_version": FEATURE_SET_FORMAT,
            "name": self.name,
            "context": self.context,
            "features": self.features,
            "lexicons": self.lexicons.iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.reference.clone())))
                .collect::<serde_json::Map<_, _>>(),
        })
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    fn lexicon(&self, name: &str) -> Result<Lexicon, FeatureSetError> {
        match self.lexicons.get(name) {
            Some(spec) => Lexicon::new(name, &spec.entries).map_err(|e| FeatureSetError::BadLexicon {
                name: name.to_string(),
                message: e.to_string(),
            }),
            None => Ok(Lexicon::empty(name)),
        }
    }

    /// Builds the catalog graph with this set's lexicons and checks every
    /// declaration against it.
    pub fn build_graph(&self) -> Result<DependencyGraph, FeatureSetError> {
        let graph = reference_graph(self.lexicon(INFORMAL_LEXICON)?, self.lexicon(BADWORDS_LEXICON)?);
        for decl in &self.features {
            let node = graph
                .get(&decl.name)
                .filter(|n| n.kind == NodeKind::Feature)
                .ok_or_else(|| FeatureSetError::UnknownFeature(decl.name.clone()))?;
            if node.value_type != decl.value_type || node.dependencies != decl.depends_on {
                return Err(FeatureSetError::DeclarationMismatch {
                    name: decl.name.clone(),
                    declared: format!("{} {:?}", decl.value_type, decl.depends_on),
                    actual: format!("{} {:?}", node.value_type, node.dependencies),
                });
            }
        }
        Ok(graph)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_set(dir: &Path, features: serde_json::Value) -> std::path::PathBuf {
        fs::create_dir_all(dir.join("lexicons")).unwrap();
        fs::write(dir.join("lexicons/informal.txt"), "lol\nhahaha+\n").unwrap();
        let path = dir.join("set.json");
        let doc = serde_json::json!({
            "format_version": 1,
            "name": "enwiki.damaging",
            "context": "enwiki",
            "features": features,
            "lexicons": {"informal_words": "lexicons/informal.txt"},
        });
        fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        path
    }

    #[test]
    fn loads_and_inlines_lexicons() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_set(
            dir.path(),
            serde_json::json!([
                {"name": "words_count", "type": "integer", "depends_on": ["revision.text"]},
                {"name": "informal_word_count", "type": "integer", "depends_on": ["revision.text"]}
            ]),
        );
        let set = FeatureSet::load(&path).unwrap();
        assert_eq!(set.feature_names(), ["words_count", "informal_word_count"]);
        assert_eq!(set.lexicons["informal_words"].entries, ["lol", "hahaha+"]);
        assert_eq!(set.lexicons["informal_words"].reference, "lexicons/informal.txt");
    }

    #[test]
    fn rejects_mismatched_declarations() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_set(
            dir.path(),
            serde_json::json!([{"name": "words_count", "type": "real", "depends_on": ["revision.text"]}]),
        );
        assert!(matches!(FeatureSet::load(&path), Err(FeatureSetError::DeclarationMismatch { .. })));

        let path = write_set(
            dir.path(),
            serde_json::json!([{"name": "vibes", "type": "real", "depends_on": []}]),
        );
        assert!(matches!(FeatureSet::load(&path), Err(FeatureSetError::UnknownFeature(_))));
    }

    #[test]
    fn catalog_declarations_round_trip_through_file_form() {
        let dir = tempfile::tempdir().unwrap();
        let set = FeatureSet::from_catalog("s", "enwiki", &["bytes_changed", "revision.user.is_anon"], BTreeMap::new())
            .unwrap();
        let path = dir.path().join("s.json");
        fs::write(&path, set.to_file_json().to_string()).unwrap();
        assert_eq!(FeatureSet::load(&path).unwrap(), set);
    }
}
