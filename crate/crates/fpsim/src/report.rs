//! Violation records shared by the invariant checkers and the experiment
//! harness. Checkers report violations instead of panicking so a run can
//! surface every failed assertion with its step context.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One failed runtime assertion, with enough context to replay the step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    /// Which check fired (e.g. "cycling-case", "energy-increase").
    pub kind: String,
    /// Step index the check was evaluated at.
    pub step: u64,
    /// Human-readable description.
    pub detail: String,
    /// Named numeric context, sorted for stable serialization.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, f64>,
}

impl Violation {
    pub fn new(kind: &str, step: u64) -> Self {
        Violation {
            kind: kind.to_string(),
            step,
            detail: String::new(),
            data: BTreeMap::new(),
        }
    }

    pub fn detail(mut self, detail: String) -> Self {
        self.detail = detail;
        self
    }

    pub fn data(mut self, key: &str, value: f64) -> Self {
        self.data.insert(key.to_string(), value);
        self
    }
}

/// Violations grouped by suite, as emitted by the verify command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub violations: Vec<Violation>,
    /// Suite-specific scalar statistics (max energies, fitted slopes, ...).
    pub stats: BTreeMap<String, f64>,
}

impl SuiteReport {
    pub fn new(suite: &str) -> Self {
        SuiteReport {
            suite: suite.to_string(),
            ..Default::default()
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn stat(&mut self, key: &str, value: f64) {
        self.stats.insert(key.to_string(), value);
    }

    pub fn count_by_kind(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for v in &self.violations {
            *out.entry(v.kind.clone()).or_insert(0) += 1;
        }
        out
    }
}
