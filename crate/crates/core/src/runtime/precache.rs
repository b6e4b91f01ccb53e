use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::{bounded, TrySendError};
use serde::Deserialize;
use thiserror::Error;

use super::service::ScoringService;
use crate::model_store::ModelRegistry;

/// One record of the change stream.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ChangeEvent {
    pub context: String,
    pub event: String,
    pub rev_id: u64,
}

#[derive(Debug, Error)]
pub enum PrecacheError {
    #[error("precache config names unknown model {model:?} in context {context:?}")]
    UnknownModel { context: String, model: String },
    #[error("malformed precache config: {0}")]
    Malformed(String),
    #[error("cannot open event source {source_spec:?}: {message}")]
    Source { source_spec: String, message: String },
}

/// Which event types warrant precaching which models: context → model →
/// event types. On disk this is the same nesting as a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(transparent)]
pub struct PrecacheConfig {
    rules: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
}

impl PrecacheConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, context: &str, model: &str, event: &str) -> Self {
        self.rules
            .entry(context.to_string())
            .or_default()
            .entry(model.to_string())
            .or_default()
            .insert(event.to_string());
        self
    }

    /// Every registered model precaches `events`.
    pub fn all_models(registry: &ModelRegistry, events: &[&str]) -> Self {
        let mut config = Self::new();
        for context in registry.contexts() {
            for model in registry.models(&context) {
                for event in events {
                    config = config.with(&context, &model.name, event);
                }
            }
        }
        config
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PrecacheError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| PrecacheError::Malformed(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| PrecacheError::Malformed(e.to_string()))
    }

    pub fn validate(&self, registry: &ModelRegistry) -> Result<(), PrecacheError> {
        for (context, models) in &self.rules {
            for model in models.keys() {
                if registry.get(context, model).is_none() {
                    return Err(PrecacheError::UnknownModel { context: context.clone(), model: model.clone() });
                }
            }
        }
        Ok(())
    }

    /// Models to precache for an event.
    pub fn models_for<'a>(&'a self, event: &'a ChangeEvent) -> impl Iterator<Item = &'a str> + 'a {
        self.rules
            .get(&event.context)
            .into_iter()
            .flat_map(|models| models.iter())
            .filter(|(_, events)| events.contains(&event.event))
            .map(|(model, _)| model.as_str())
    }
}

/// Opens an event stream: `-` for stdin, `tcp://host:port` to connect to a
/// stream server, anything else as a file or named pipe.
pub fn open_event_source(spec: &str) -> Result<Box<dyn BufRead + Send>, PrecacheError> {
    let fail = |e: std::io::Error| PrecacheError::Source { source_spec: spec.to_string(), message: e.to_string() };
    if spec == "-" {
        return Ok(Box::new(BufReader::new(std::io::stdin())));
    }
    if let Some(addr) = spec.strip_prefix("tcp://") {
        return Ok(Box::new(BufReader::new(TcpStream::connect(addr).map_err(fail)?)));
    }
    Ok(Box::new(BufReader::new(fs::File::open(spec).map_err(fail)?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PrecacheReport {
    pub events_read: u64,
    pub malformed: u64,
    pub enqueued: u64,
    pub dropped: u64,
    pub scored: u64,
    pub failed: u64,
}

/// A running precacher: a reader thread that never blocks on scoring and a
/// single consumer feeding the service.
pub struct PrecacheHandle {
    reader: JoinHandle<PrecacheReport>,
    consumer: JoinHandle<(u64, u64)>,
}

impl PrecacheHandle {
    /// Waits until the source is exhausted and the queue drained.
    pub fn join(self) -> PrecacheReport {
        let mut report = self.reader.join().expect("precache reader panicked");
        let (scored, failed) = self.consumer.join().expect("precache consumer panicked");
        report.scored = scored;
        report.failed = failed;
        report
    }
}

pub fn run_precacher<R>(
    source: R,
    config: PrecacheConfig,
    service: Arc<ScoringService>,
    queue_capacity: usize,
) -> PrecacheHandle
where
    R: BufRead + Send + 'static,
{
    let (tx, rx) = bounded::<(String, String, u64)>(queue_capacity.max(1));
    let metrics = Arc::clone(service.metrics());
    let reader = std::thread::Builder::new()
        .name("precache-reader".into())
        .spawn(move || {
            let mut report = PrecacheReport::default();
            for line in source.lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                report.events_read += 1;
                let event: ChangeEvent = match serde_json::from_str(&line) {
                    Ok(e) => e,
                    Err(_) => {
                        report.malformed += 1;
                        metrics.malformed_events.inc();
                        continue;
                    }
                };
                for model in config.models_for(&event) {
                    match tx.try_send((event.context.clone(), model.to_string(), event.rev_id)) {
                        Ok(()) => report.enqueued += 1,
                        Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {
                            report.dropped += 1;
                            metrics.dropped_events.inc();
                        }
                    }
                }
            }
            report
        })
        .expect("spawn precache reader");
    let consumer = std::thread::Builder::new()
        .name("precache-consumer".into())
        .spawn(move || {
            let (scored, failed) = (AtomicU64::new(0), AtomicU64::new(0));
            for (context, model, rev) in rx {
                match service.precache(&context, &model, rev) {
                    Ok(_) => scored.fetch_add(1, Ordering::Relaxed),
                    Err(e) => {
                        log::debug!("precache {context}:{model}:{rev} failed: {e}");
                        failed.fetch_add(1, Ordering::Relaxed)
                    }
                };
            }
            (scored.into_inner(), failed.into_inner())
        })
        .expect("spawn precache consumer");
    PrecacheHandle { reader, consumer }
}
