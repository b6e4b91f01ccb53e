//! Dependency graph of datasources and features, and the per-request solver.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use super::value::{Value, ValueType};
use crate::datasources::{DatasourceClient, DatasourceError, RevisionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Datasource,
    Feature,
}

impl NodeKind {
    pub fn prefix(self) -> &'static str {
        match self {
            NodeKind::Datasource => "datasource",
            NodeKind::Feature => "feature",
        }
    }
}

/// Field of a fetched revision that a root datasource exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootField {
    Text,
    ParentText,
    Timestamp,
    UserIsAnon,
    UserAccountAgeSeconds,
}

impl RootField {
    fn read(self, record: &RevisionRecord) -> Value {
        match self {
            RootField::Text => Value::text(&record.text),
            RootField::ParentText => Value::text(&record.parent_text),
            RootField::Timestamp => Value::Int(record.timestamp),
            RootField::UserIsAnon => Value::Bool(record.user_is_anon),
            RootField::UserAccountAgeSeconds => {
                Value::Int(i64::try_from(record.user_account_age_seconds).unwrap_or(i64::MAX))
            }
        }
    }
}

pub type ComputeFn = Arc<dyn Fn(&[Value]) -> Result<Value, String> + Send + Sync>;

#[derive(Clone)]
pub enum Provider {
    Root(RootField),
    Derived(ComputeFn),
}

#[derive(Clone)]
pub struct DependentRef {
    pub name: String,
    pub kind: NodeKind,
    pub value_type: ValueType,
    pub dependencies: Vec<String>,
    pub provider: Provider,
}

impl fmt::Debug for DependentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DependentRef")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("value_type", &self.value_type)
            .field("dependencies", &self.dependencies)
            .finish()
    }
}

impl DependentRef {
    pub fn root(name: impl Into<String>, field: RootField, value_type: ValueType) -> Self {
        Self {
            name: name.into(),
            kind: NodeKind::Datasource,
            value_type,
            dependencies: Vec::new(),
            provider: Provider::Root(field),
        }
    }

    pub fn datasource<F>(name: impl Into<String>, value_type: ValueType, deps: &[&str], f: F) -> Self
    where
        F: Fn(&[Value]) -> Result<Value, String> + Send + Sync + 'static,
    {
        Self::derived(NodeKind::Datasource, name.into(), value_type, deps, Arc::new(f))
    }

    pub fn feature<F>(name: impl Into<String>, value_type: ValueType, deps: &[&str], f: F) -> Self
    where
        F: Fn(&[Value]) -> Result<Value, String> + Send + Sync + 'static,
    {
        Self::derived(NodeKind::Feature, name.into(), value_type, deps, Arc::new(f))
    }

    fn derived(kind: NodeKind, name: String, value_type: ValueType, deps: &[&str], f: ComputeFn) -> Self {
        Self {
            name,
            kind,
            value_type,
            dependencies: deps.iter().map(|d| d.to_string()).collect(),
            provider: Provider::Derived(f),
        }
    }

    /// `feature.<name>` or `datasource.<name>`.
    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.kind.prefix(), self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("dependent {0:?} is already registered")]
    DuplicateName(String),
    #[error("dependency cycle: {}", .0.join("→"))]
    CycleDetected(Vec<String>),
    #[error("unknown dependent {0:?}")]
    UnknownDependent(String),
    #[error("datasource failure while solving {name:?}: {source}")]
    Datasource { name: String, source: DatasourceError },
    #[error("type mismatch for {name:?}: expected {expected}, got {found}")]
    TypeMismatch { name: String, expected: ValueType, found: String },
    #[error("failed to compute {name:?}: {message}")]
    Compute { name: String, message: String },
}

/// Immutable once built; share it across requests behind an `Arc`.
#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    nodes: IndexMap<String, DependentRef>,
}

impl DependencyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a node. Dependencies may name nodes registered later, but a
    /// registration that closes a cycle is rejected.
    pub fn register(&mut self, node: DependentRef) -> Result<(), FeatureError> {
        if self.nodes.contains_key(&node.name) {
            return Err(FeatureError::DuplicateName(node.name));
        }
        if let Some(cycle) = self.find_cycle_through(&node) {
            return Err(FeatureError::CycleDetected(cycle));
        }
        self.nodes.insert(node.name.clone(), node);
        Ok(())
    }

    pub fn with(mut self, node: DependentRef) -> Result<Self, FeatureError> {
        self.register(node)?;
        Ok(self)
    }

    /// Checks that every dependency resolves to a registered node.
    pub fn check_resolved(&self) -> Result<(), FeatureError> {
        for node in self.nodes.values() {
            for dep in &node.dependencies {
                if !self.nodes.contains_key(dep) {
                    return Err(FeatureError::UnknownDependent(dep.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &DependentRef> {
        self.nodes.values()
    }

    pub fn get(&self, name: &str) -> Option<&DependentRef> {
        self.nodes.get(name)
    }

    /// Resolves a bare name or one carrying a `feature.`/`datasource.`
    /// prefix. A prefix must agree with the node's kind.
    pub fn resolve(&self, name: &str) -> Result<&DependentRef, FeatureError> {
        if let Some(node) = self.nodes.get(name) {
            return Ok(node);
        }
        let prefixed = [("feature.", NodeKind::Feature), ("datasource.", NodeKind::Datasource)];
        for (prefix, kind) in prefixed {
            if let Some(bare) = name.strip_prefix(prefix) {
                if let Some(node) = self.nodes.get(bare).filter(|n| n.kind == kind) {
                    return Ok(node);
                }
            }
        }
        Err(FeatureError::UnknownDependent(name.to_string()))
    }

    /// Every node that transitively depends on `name`, including itself.
    pub fn dependents_of(&self, name: &str) -> HashSet<String> {
        let mut reached: HashSet<String> = HashSet::from([name.to_string()]);
        let mut changed = true;
        while changed {
            changed = false;
            for node in self.nodes.values() {
                if !reached.contains(&node.name)
                    && node.dependencies.iter().any(|d| reached.contains(d))
                {
                    reached.insert(node.name.clone());
                    changed = true;
                }
            }
        }
        reached
    }

    fn find_cycle_through(&self, node: &DependentRef) -> Option<Vec<String>> {
        fn walk<'a>(
            graph: &'a DependencyGraph,
            target: &str,
            deps: &'a [String],
            path: &mut Vec<&'a str>,
            seen: &mut HashSet<&'a str>,
        ) -> bool {
            for dep in deps {
                if dep == target {
                    return true;
                }
                if !seen.insert(dep) {
                    continue;
                }
                if let Some(next) = graph.nodes.get(dep) {
                    path.push(dep);
                    if walk(graph, target, &next.dependencies, path, seen) {
                        return true;
                    }
                    path.pop();
                }
            }
            false
        }

        let mut path = Vec::new();
        let mut seen = HashSet::new();
        if !walk(self, &node.name, &node.dependencies, &mut path, &mut seen) {
            return None;
        }
        let mut cycle: Vec<String> = std::iter::once(node.name.clone())
            .chain(path.into_iter().map(str::to_string))
            .collect();
        // Start the reported cycle at its earliest-registered member.
        let order = |n: &String| self.nodes.get_index_of(n).unwrap_or(usize::MAX);
        let start = (0..cycle.len()).min_by_key(|&i| order(&cycle[i])).unwrap_or(0);
        cycle.rotate_left(start);
        cycle.push(cycle[0].clone());
        Some(cycle)
    }
}

/// Injected values keyed by canonical (bare) node name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InjectionOverlay {
    values: BTreeMap<String, Value>,
}

impl InjectionOverlay {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds an overlay from string-valued pairs (URL parameters, CLI
    /// `--set` flags), parsing each value strictly against its target type.
    pub fn parse<K, V>(
        graph: &DependencyGraph,
        pairs: impl IntoIterator<Item = (K, V)>,
    ) -> Result<Self, FeatureError>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut values = BTreeMap::new();
        for (name, raw) in pairs {
            let node = graph.resolve(name.as_ref())?;
            let value = Value::parse_as(raw.as_ref(), node.value_type).ok_or_else(|| {
                FeatureError::TypeMismatch {
                    name: name.as_ref().to_string(),
                    expected: node.value_type,
                    found: format!("{:?}", raw.as_ref()),
                }
            })?;
            values.insert(node.name.clone(), value);
        }
        Ok(Self { values })
    }

    /// Builds an overlay from typed values. Integers are accepted for real
    /// targets; every other mismatch is rejected.
    pub fn from_values<K: AsRef<str>>(
        graph: &DependencyGraph,
        pairs: impl IntoIterator<Item = (K, Value)>,
    ) -> Result<Self, FeatureError> {
        let mut values = BTreeMap::new();
        for (name, value) in pairs {
            let node = graph.resolve(name.as_ref())?;
            let value = match (node.value_type, value) {
                (ValueType::Real, Value::Int(i)) => Value::Real(i as f64),
                (expected, v) if v.value_type() == expected => v,
                (expected, v) => {
                    return Err(FeatureError::TypeMismatch {
                        name: name.as_ref().to_string(),
                        expected,
                        found: v.describe(),
                    })
                }
            };
            values.insert(node.name.clone(), value);
        }
        Ok(Self { values })
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.values.iter()
    }
}

/// Where the solver gets the revision behind root datasources.
#[derive(Clone)]
pub enum RecordSource<'a> {
    /// Fetched lazily, at most once, on first use.
    Client(&'a dyn DatasourceClient),
    /// Already fetched (batch IO stage).
    Prefetched(Arc<RevisionRecord>),
}

/// Request-local solving state. Never shared between requests.
pub struct ExtractionContext<'a> {
    pub context_id: String,
    pub revision_id: u64,
    graph: &'a DependencyGraph,
    source: RecordSource<'a>,
    record: Option<Arc<RevisionRecord>>,
    overlay: &'a InjectionOverlay,
    memo: HashMap<String, Value>,
}

impl<'a> ExtractionContext<'a> {
    pub fn new(
        graph: &'a DependencyGraph,
        context_id: impl Into<String>,
        revision_id: u64,
        source: RecordSource<'a>,
        overlay: &'a InjectionOverlay,
    ) -> Self {
        let record = match &source {
            RecordSource::Prefetched(r) => Some(Arc::clone(r)),
            RecordSource::Client(_) => None,
        };
        Self {
            context_id: context_id.into(),
            revision_id,
            graph,
            source,
            record,
            overlay,
            memo: HashMap::new(),
        }
    }

    /// Solves one dependent. Overlay values are returned verbatim; all other
    /// values are computed from their dependencies and memoized.
    pub fn solve(&mut self, name: &str) -> Result<Value, FeatureError> {
        let graph = self.graph;
        let node = graph.resolve(name)?;
        self.solve_node(node)
    }

    /// Solves several dependents in order, sharing the memo between them.
    pub fn extract_many<S: AsRef<str>>(&mut self, names: &[S]) -> Result<Vec<Value>, FeatureError> {
        names.iter().map(|n| self.solve(n.as_ref())).collect()
    }

    fn solve_node(&mut self, node: &'a DependentRef) -> Result<Value, FeatureError> {
        if let Some(v) = self.overlay.get(&node.name) {
            return Ok(v.clone());
        }
        if let Some(v) = self.memo.get(&node.name) {
            return Ok(v.clone());
        }
        let value = match &node.provider {
            Provider::Root(field) => {
                let record = self.record().map_err(|source| FeatureError::Datasource {
                    name: node.name.clone(),
                    source,
                })?;
                field.read(&record)
            }
            Provider::Derived(compute) => {
                let graph = self.graph;
                let mut inputs = Vec::with_capacity(node.dependencies.len());
                for dep in &node.dependencies {
                    let dep_node = graph
                        .get(dep)
                        .ok_or_else(|| FeatureError::UnknownDependent(dep.clone()))?;
                    inputs.push(self.solve_node(dep_node)?);
                }
                compute(&inputs).map_err(|message| FeatureError::Compute {
                    name: node.name.clone(),
                    message,
                })?
            }
        };
        if value.value_type() != node.value_type {
            return Err(FeatureError::TypeMismatch {
                name: node.name.clone(),
                expected: node.value_type,
                found: value.describe(),
            });
        }
        self.memo.insert(node.name.clone(), value.clone());
        Ok(value)
    }

    fn record(&mut self) -> Result<Arc<RevisionRecord>, DatasourceError> {
        if let Some(r) = &self.record {
            return Ok(Arc::clone(r));
        }
        let RecordSource::Client(client) = &self.source else {
            unreachable!("prefetched sources always hold a record")
        };
        let record = client.get_revision(&self.context_id, self.revision_id)?;
        self.record = Some(Arc::clone(&record));
        Ok(record)
    }
}
