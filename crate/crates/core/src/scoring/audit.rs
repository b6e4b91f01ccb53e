use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::document::ErrorType;

pub const AUDIT_BINS: usize = 50;

/// The injections behind the three standard audit runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditRun {
    Natural,
    Anon,
    Newcomer,
}

impl AuditRun {
    pub const ALL: [AuditRun; 3] = [AuditRun::Natural, AuditRun::Anon, AuditRun::Newcomer];

    pub fn name(self) -> &'static str {
        match self {
            AuditRun::Natural => "natural",
            AuditRun::Anon => "anon",
            AuditRun::Newcomer => "newcomer",
        }
    }

    /// Everyone anonymous, or everyone a brand-new registered account.
    pub fn overlay(self) -> Vec<(String, String)> {
        let pairs: &[(&str, &str)] = match self {
            AuditRun::Natural => &[],
            AuditRun::Anon => &[("feature.revision.user.is_anon", "true")],
            AuditRun::Newcomer => &[
                ("feature.revision.user.is_anon", "false"),
                ("feature.revision.user.account_age_seconds", "0"),
            ],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }
}

impl std::str::FromStr for AuditRun {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        AuditRun::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown audit run {s:?} (natural, anon, newcomer)"))
    }
}

/// Distribution of a model's target-class probability over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditSummary {
    pub n: u64,
    /// Counts over [0, 1] in equal-width bins; the last bin includes 1.0.
    pub bins: Vec<u64>,
    pub mean: f64,
    pub median: f64,
    pub errors: BTreeMap<String, u64>,
    #[serde(skip)]
    values: Vec<f64>,
}

impl Default for AuditSummary {
    fn default() -> Self {
        Self::new()
    }
}

impl AuditSummary {
    pub fn new() -> Self {
        Self { n: 0, bins: vec![0; AUDIT_BINS], mean: 0.0, median: 0.0, errors: BTreeMap::new(), values: Vec::new() }
    }

    pub fn bin_of(p: f64) -> usize {
        ((p * AUDIT_BINS as f64).floor() as usize).min(AUDIT_BINS - 1)
    }

    pub fn record(&mut self, p: f64) {
        self.bins[Self::bin_of(p)] += 1;
        self.values.push(p);
        self.n += 1;
    }

    pub fn record_error(&mut self, kind: ErrorType, count: u64) {
        *self.errors.entry(kind.to_string()).or_default() += count;
    }

    /// Computes mean and median from the recorded values.
    pub fn finish(&mut self) {
        if self.values.is_empty() {
            return;
        }
        let n = self.values.len();
        self.mean = self.values.iter().sum::<f64>() / n as f64;
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        self.median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Share of scored items whose probability falls below `p`.
    pub fn fraction_below(&self, p: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().filter(|v| **v < p).count() as f64 / self.values.len() as f64
    }

    /// Center of the fullest bin, restricted to `[lo, hi)`; the first such
    /// bin wins ties. `None` when nothing was recorded in the range.
    pub fn mode_in(&self, lo: f64, hi: f64) -> Option<f64> {
        let width = 1.0 / AUDIT_BINS as f64;
        let mut best: Option<(usize, u64)> = None;
        for (i, &count) in self.bins.iter().enumerate() {
            let center = (i as f64 + 0.5) * width;
            if count == 0 || center < lo || center >= hi {
                continue;
            }
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((i, count));
            }
        }
        best.map(|(i, _)| (i as f64 + 0.5) * width)
    }

    /// Tab-separated table: one row per bin, then summary lines.
    pub fn render_table(&self, run: &str) -> String {
        let mut out = String::from("run\tbin_start\tbin_end\tcount\tdensity\n");
        let width = 1.0 / AUDIT_BINS as f64;
        for (i, count) in self.bins.iter().enumerate() {
            let density = if self.n == 0 { 0.0 } else { *count as f64 / (self.n as f64 * width) };
            let _ = writeln!(out, "{run}\t{:.2}\t{:.2}\t{count}\t{density:.4}", i as f64 * width, (i + 1) as f64 * width);
        }
        let mode = self.mode_in(0.0, 1.0).unwrap_or(0.0);
        let _ = writeln!(
            out,
            "# {run} n={} mean={:.4} median={:.4} mode={mode:.2}",
            self.n, self.mean, self.median
        );
        for (kind, count) in &self.errors {
            let _ = writeln!(out, "# {run} errors {kind}={count}");
        }
        out
    }
}
