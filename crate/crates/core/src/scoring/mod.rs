//! From revisions to score documents: single, batched and counterfactual
//! (injected) scoring, plus distribution audits.

mod audit;
mod document;
mod engine;

pub use audit::{AuditRun, AuditSummary, AUDIT_BINS};
pub use document::{ErrorDocument, ErrorType, FeatureValues, ScoreDocument, ScoreResult};
pub use engine::{
    compute_document, BatchScores, EngineConfig, OverlayPairs, ScoringEngine, DEFAULT_SCORE_TIMEOUT,
};
