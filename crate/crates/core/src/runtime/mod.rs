//! Performance layer: worker pools, the LRU score cache, in-flight
//! de-duplication, change-stream precaching and metrics.

mod cache;
mod dedup;
mod metrics;
mod pool;
mod precache;
mod service;

pub use cache::{ScoreCache, DEFAULT_CACHE_CAPACITY};
pub use dedup::{LeaderPanicked, Singleflight};
pub use metrics::{Counter, Histogram, HistogramSummary, Metrics, MetricsSnapshot};
pub use pool::{TaskError, TaskHandle, WorkerPool};
pub use precache::{
    open_event_source, run_precacher, ChangeEvent, PrecacheConfig, PrecacheError, PrecacheHandle, PrecacheReport,
};
pub use service::{ScoreJobKey, ScoringService, ServiceConfig};
