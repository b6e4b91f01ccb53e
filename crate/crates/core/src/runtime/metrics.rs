use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use parking_lot::Mutex;

/// Most recent samples kept for percentile estimates.
const MAX_SAMPLES: usize = 100_000;

#[derive(Debug, Default)]
pub struct Counter(AtomicU64);

impl Counter {
    pub fn inc(&self) {
        self.add(1);
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Latency samples in seconds.
#[derive(Debug, Default)]
pub struct Histogram {
    samples: Mutex<VecDeque<f64>>,
    count: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HistogramSummary {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Histogram {
    pub fn observe(&self, value: Duration) {
        let mut samples = self.samples.lock();
        if samples.len() == MAX_SAMPLES {
            samples.pop_front();
        }
        samples.push_back(value.as_secs_f64());
        self.count.fetch_add(1, Ordering::Relaxed);
    }

    /// Nearest-rank percentiles over the retained samples.
    pub fn summary(&self) -> HistogramSummary {
        let mut sorted: Vec<f64> = self.samples.lock().iter().copied().collect();
        if sorted.is_empty() {
            return HistogramSummary::default();
        }
        sorted.sort_by(f64::total_cmp);
        let rank = |q: f64| {
            let i = (q * sorted.len() as f64).ceil() as usize;
            sorted[i.clamp(1, sorted.len()) - 1]
        };
        HistogramSummary {
            count: self.count.load(Ordering::Relaxed),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            p50: rank(0.50),
            p75: rank(0.75),
            p95: rank(0.95),
        }
    }
}

/// Service-wide counters and latency histograms.
#[derive(Debug, Default)]
pub struct Metrics {
    pub scores_requested: Counter,
    pub cache_hits: Counter,
    pub cache_misses: Counter,
    pub dedup_merges: Counter,
    pub precache_requests: Counter,
    pub dropped_events: Counter,
    pub malformed_events: Counter,
    pub feature_extractions: Counter,
    pub score_duration: Histogram,
    errors_by_type: Mutex<BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSnapshot {
    pub counters: Vec<(&'static str, u64)>,
    pub errors_by_type: BTreeMap<String, u64>,
    pub score_duration: HistogramSummary,
}

impl MetricsSnapshot {
    pub fn counter(&self, name: &str) -> Option<u64> {
        self.counters.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    /// Plain-text exposition, one `name value` pair per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.counters {
            let _ = writeln!(out, "{name} {value}");
        }
        for (kind, value) in &self.errors_by_type {
            let _ = writeln!(out, "errors_by_type{{type=\"{kind}\"}} {value}");
        }
        let h = &self.score_duration;
        let _ = writeln!(out, "score_duration_count {}", h.count);
        for (name, value) in [("min", h.min), ("p50", h.p50), ("p75", h.p75), ("p95", h.p95), ("max", h.max)] {
            let _ = writeln!(out, "score_duration_{name}_seconds {value:.6}");
        }
        out
    }
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_error(&self, kind: &str) {
        *self.errors_by_type.lock().entry(kind.to_string()).or_default() += 1;
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        let hits = self.cache_hits.get();
        let misses = self.cache_misses.get();
        MetricsSnapshot {
            counters: vec![
                ("scores_requested", self.scores_requested.get()),
                ("cache_hits", hits),
                ("cache_misses", misses),
                ("cache_lookups", hits + misses),
                ("dedup_merges", self.dedup_merges.get()),
                ("precache_requests", self.precache_requests.get()),
                ("dropped_events", self.dropped_events.get()),
                ("malformed_events", self.malformed_events.get()),
                ("feature_extractions", self.feature_extractions.get()),
            ],
            errors_by_type: self.errors_by_type.lock().clone(),
            score_duration: self.score_duration.summary(),
        }
    }

    pub fn render(&self) -> String {
        self.snapshot().render()
    }
}
