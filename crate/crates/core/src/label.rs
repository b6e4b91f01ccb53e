//! Class labels and label-keyed maps.
//!
//! Labels are either booleans (`damaging`, `goodfaith`) or strings
//! (`Start`, `Stub`, ...). On the wire a label is a JSON bool or string,
//! while a map keyed by label uses the label's string form as the key.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Bool(bool),
    Text(String),
}

impl ClassLabel {
    pub fn key(&self) -> String {
        self.to_string()
    }

    /// Parses the string key of a label. `"true"`/`"false"` are booleans.
    pub fn from_key(key: &str) -> Self {
        match key {
            "true" => ClassLabel::Bool(true),
            "false" => ClassLabel::Bool(false),
            other => ClassLabel::Text(other.to_string()),
        }
    }

    /// Resolves `key` against a declared label set.
    pub fn resolve<'a>(key: &str, label_set: &'a [ClassLabel]) -> Option<&'a ClassLabel> {
        label_set.iter().find(|l| l.key() == key)
    }

    pub fn from_json(value: &serde_json::Value) -> Option<Self> {
        match value {
            serde_json::Value::Bool(b) => Some(ClassLabel::Bool(*b)),
            serde_json::Value::String(s) => Some(ClassLabel::Text(s.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Bool(b) => write!(f, "{b}"),
            ClassLabel::Text(s) => f.write_str(s),
        }
    }
}

impl FromStr for ClassLabel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(ClassLabel::from_key(s))
    }
}

impl From<bool> for ClassLabel {
    fn from(b: bool) -> Self {
        ClassLabel::Bool(b)
    }
}

impl From<&str> for ClassLabel {
    fn from(s: &str) -> Self {
        ClassLabel::Text(s.to_string())
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ClassLabel::Bool(b) => serializer.serialize_bool(*b),
            ClassLabel::Text(s) => serializer.serialize_str(s),
        }
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct LabelVisitor;

        impl Visitor<'_> for LabelVisitor {
            type Value = ClassLabel;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a boolean or string class label")
            }

            fn visit_bool<E: de::Error>(self, v: bool) -> Result<ClassLabel, E> {
                Ok(ClassLabel::Bool(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ClassLabel, E> {
                Ok(ClassLabel::Text(v.to_string()))
            }
        }

        deserializer.deserialize_any(LabelVisitor)
    }
}

/// An insertion-ordered map keyed by class label.
///
/// Order follows the label set the map was built from, so serialized
/// documents list classes in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap<T> {
    entries: Vec<(ClassLabel, T)>,
}

impl<T> Default for LabelMap<T> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<T> LabelMap<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fn(labels: &[ClassLabel], mut f: impl FnMut(&ClassLabel) -> T) -> Self {
        Self {
            entries: labels.iter().map(|l| (l.clone(), f(l))).collect(),
        }
    }

    pub fn insert(&mut self, label: ClassLabel, value: T) {
        match self.entries.iter_mut().find(|(l, _)| *l == label) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((label, value)),
        }
    }

    pub fn get(&self, label: &ClassLabel) -> Option<&T> {
        self.entries.iter().find(|(l, _)| l == label).map(|(_, v)| v)
    }

    pub fn get_key(&self, key: &str) -> Option<&T> {
        self.entries.iter().find(|(l, _)| l.key() == key).map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ClassLabel, &T)> {
        self.entries.iter().map(|(l, v)| (l, v))
    }

    pub fn labels(&self) -> impl Iterator<Item = &ClassLabel> {
        self.entries.iter().map(|(l, _)| l)
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.entries.iter().map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn map<U>(&self, mut f: impl FnMut(&ClassLabel, &T) -> U) -> LabelMap<U> {
        LabelMap {
            entries: self.entries.iter().map(|(l, v)| (l.clone(), f(l, v))).collect(),
        }
    }
}

impl LabelMap<f64> {
    /// The most probable label; ties go to the earliest entry.
    pub fn argmax(&self) -> Option<&ClassLabel> {
        let mut best: Option<&(ClassLabel, f64)> = None;
        for entry in &self.entries {
            if best.map_or(true, |b| entry.1 > b.1) {
                best = Some(entry);
            }
        }
        best.map(|(l, _)| l)
    }
}

impl<T> FromIterator<(ClassLabel, T)> for LabelMap<T> {
    fn from_iter<I: IntoIterator<Item = (ClassLabel, T)>>(iter: I) -> Self {
        let mut map = LabelMap::new();
        for (l, v) in iter {
            map.insert(l, v);
        }
        map
    }
}

impl<T: Serialize> Serialize for LabelMap<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (label, value) in &self.entries {
            map.serialize_entry(&label.key(), value)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for LabelMap<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MapVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for MapVisitor<T> {
            type Value = LabelMap<T>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map keyed by class label")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<LabelMap<T>, A::Error> {
                let mut map = LabelMap::new();
                while let Some((key, value)) = access.next_entry::<String, T>()? {
                    map.insert(ClassLabel::from_key(&key), value);
                }
                Ok(map)
            }
        }

        deserializer.deserialize_map(MapVisitor(std::marker::PhantomData))
    }
}
