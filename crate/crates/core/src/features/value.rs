use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Boolean,
    Integer,
    Real,
    Text,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Boolean => "boolean",
            ValueType::Integer => "integer",
            ValueType::Real => "real",
            ValueType::Text => "text",
        })
    }
}

/// A resolved datasource or feature value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(Arc<str>),
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Bool(_) => ValueType::Boolean,
            Value::Int(_) => ValueType::Integer,
            Value::Real(_) => ValueType::Real,
            Value::Text(_) => ValueType::Text,
        }
    }

    /// Numeric view used as model input. Text has no numeric view.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            Value::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn text(s: impl AsRef<str>) -> Self {
        Value::Text(Arc::from(s.as_ref()))
    }

    /// Strictly parses a string into `target`. Booleans must be `true` or
    /// `false`; integers must parse exactly; reals must be finite.
    pub fn parse_as(raw: &str, target: ValueType) -> Option<Value> {
        match target {
            ValueType::Boolean => match raw {
                "true" => Some(Value::Bool(true)),
                "false" => Some(Value::Bool(false)),
                _ => None,
            },
            ValueType::Integer => raw.parse::<i64>().ok().map(Value::Int),
            ValueType::Real => raw.parse::<f64>().ok().filter(|r| r.is_finite()).map(Value::Real),
            ValueType::Text => Some(Value::text(raw)),
        }
    }

    /// Strict coercion of a JSON value into `target`. Integer targets reject
    /// fractional numbers; real targets accept integers.
    pub fn from_json_as(json: &serde_json::Value, target: ValueType) -> Option<Value> {
        use serde_json::Value as J;
        match (target, json) {
            (ValueType::Boolean, J::Bool(b)) => Some(Value::Bool(*b)),
            (ValueType::Integer, J::Number(n)) => n.as_i64().map(Value::Int),
            (ValueType::Real, J::Number(n)) => n.as_f64().filter(|r| r.is_finite()).map(Value::Real),
            (ValueType::Text, J::String(s)) => Some(Value::text(s)),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Real(r) => serde_json::Value::from(*r),
            Value::Text(t) => serde_json::Value::String(t.to_string()),
        }
    }

    pub(crate) fn describe(&self) -> String {
        match self {
            Value::Text(t) if t.len() > 40 => format!("text({} bytes)", t.len()),
            other => format!("{} {}", other.value_type(), other.to_json()),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Bool(b) => serializer.serialize_bool(*b),
            Value::Int(i) => serializer.serialize_i64(*i),
            Value::Real(r) => serializer.serialize_f64(*r),
            Value::Text(t) => serializer.serialize_str(t),
        }
    }
}
