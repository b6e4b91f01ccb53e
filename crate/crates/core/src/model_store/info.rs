use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::statistics::Statistics;
use super::thresholds::ThresholdTable;
use super::version::Version;
use super::ModelStoreError;
use crate::threshold_query::ThresholdQuery;

/// Where a model was trained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub machine: String,
    pub os: String,
    pub runtime: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            machine: std::env::consts::ARCH.to_string(),
            os: std::env::consts::OS.to_string(),
            runtime: format!("wikiscore {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

/// A model's self-description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    #[serde(rename = "type")]
    pub model_type: String,
    pub version: Version,
    pub environment: Environment,
    pub params: Json,
    pub statistics: Statistics,
}

/// One step of a model-info field path.
#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Field(String),
    Query(String),
}

/// Splits `a.b.'query with . inside'` into segments. A quoted segment must
/// come last.
fn split_path(path: &str) -> Result<Vec<Segment>, ModelStoreError> {
    let bad = || ModelStoreError::UnknownFieldPath(path.to_string());
    let mut segments = Vec::new();
    let mut rest = path;
    while !rest.is_empty() {
        let quote = rest.chars().next().filter(|c| *c == '\'' || *c == '"');
        if let Some(q) = quote {
            let end = rest[1..].find(q).ok_or_else(bad)? + 1;
            if end + 1 != rest.len() {
                return Err(bad());
            }
            segments.push(Segment::Query(rest[1..end].to_string()));
            break;
        }
        let (field, tail) = match rest.find('.') {
            Some(i) => (&rest[..i], Some(&rest[i + 1..])),
            None => (rest, None),
        };
        if field.is_empty() {
            return Err(bad());
        }
        segments.push(Segment::Field(field.to_string()));
        match tail {
            Some("") => return Err(bad()),
            Some(t) => rest = t,
            None => break,
        }
    }
    Ok(segments)
}

impl ModelInfo {
    pub fn to_json(&self) -> Json {
        serde_json::to_value(self).expect("model info serializes")
    }

    /// The document addressed by a dotted field path, or the whole document
    /// for `None`. A final quoted segment is a threshold query evaluated on
    /// the addressed table; an unsatisfiable query yields `null`.
    pub fn lookup(&self, field_path: Option<&str>) -> Result<Json, ModelStoreError> {
        let doc = self.to_json();
        let Some(path) = field_path.filter(|p| !p.is_empty()) else {
            return Ok(doc);
        };
        let mut node = &doc;
        for segment in split_path(path)? {
            match segment {
                Segment::Field(name) => {
                    node = match node {
                        Json::Object(map) => map.get(&name),
                        Json::Array(items) => name.parse::<usize>().ok().and_then(|i| items.get(i)),
                        _ => None,
                    }
                    .ok_or_else(|| ModelStoreError::UnknownFieldPath(path.to_string()))?;
                }
                Segment::Query(query) => {
                    let query = ThresholdQuery::parse(&query)?;
                    let table: ThresholdTable = serde_json::from_value(node.clone())
                        .map_err(|_| ModelStoreError::NotAThresholdTable(path.to_string()))?;
                    return Ok(query
                        .optimize(&table)
                        .map(|row| serde_json::to_value(row).expect("row serializes"))
                        .unwrap_or(Json::Null));
                }
            }
        }
        Ok(node.clone())
    }
}
