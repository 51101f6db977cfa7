//! Append-only log of per-step subspace movement.
//!
//! Every streaming algorithm charges each arrival a recourse value (possibly
//! zero) and marks whether it rebuilt its basis from scratch. The ledger
//! keeps the per-step history and the running total so callers never
//! re-accumulate floating-point sums in different orders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One step's charge. `t` is the 1-based arrival index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub t: usize,
    pub recourse: f64,
    pub recluster_event: bool,
}

/// Per-step recourse history with a running total.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RecourseLedger {
    entries: Vec<LedgerEntry>,
    cumulative: f64,
}

impl RecourseLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one step. Steps must arrive in order with `t` starting at 1.
    pub fn record(&mut self, t: usize, recourse: f64, recluster_event: bool) -> Result<()> {
        if !recourse.is_finite() || recourse < 0.0 {
            return Err(Error::Numerical(format!(
                "recourse at step {t} must be finite and nonnegative, got {recourse}"
            )));
        }
        let expected = self.entries.len() + 1;
        if t != expected {
            return Err(Error::InvalidParameter(format!(
                "ledger steps must be consecutive: expected t={expected}, got t={t}"
            )));
        }
        self.entries.push(LedgerEntry {
            t,
            recourse,
            recluster_event,
        });
        self.cumulative += recourse;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn last(&self) -> Option<&LedgerEntry> {
        self.entries.last()
    }

    /// Sum of all recourse recorded so far.
    pub fn total(&self) -> f64 {
        self.cumulative
    }

    pub fn recluster_count(&self) -> usize {
        self.entries.iter().filter(|e| e.recluster_event).count()
    }

    /// Largest single-step charge, 0 for an empty ledger.
    pub fn max_step(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.recourse)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_counts_accumulate() {
        let mut ledger = RecourseLedger::new();
        ledger.record(1, 0.0, false).unwrap();
        ledger.record(2, 2.0, true).unwrap();
        ledger.record(3, 0.5, false).unwrap();
        assert_eq!(ledger.len(), 3);
        assert!((ledger.total() - 2.5).abs() < 1e-15);
        assert_eq!(ledger.recluster_count(), 1);
        assert!((ledger.max_step() - 2.0).abs() < 1e-15);
        assert_eq!(ledger.last().unwrap().t, 3);
    }

    #[test]
    fn rejects_gaps_and_bad_values() {
        let mut ledger = RecourseLedger::new();
        assert!(ledger.record(2, 0.0, false).is_err());
        ledger.record(1, 0.0, false).unwrap();
        assert!(ledger.record(1, 0.0, false).is_err());
        assert!(ledger.record(2, -1.0, false).is_err());
        assert!(ledger.record(2, f64::NAN, false).is_err());
        assert_eq!(ledger.len(), 1);
    }

    #[test]
    fn round_trips_through_json() {
        let mut ledger = RecourseLedger::new();
        ledger.record(1, 0.0, true).unwrap();
        ledger.record(2, 1.25, false).unwrap();
        let json = serde_json::to_string(&ledger).unwrap();
        let back: RecourseLedger = serde_json::from_str(&json).unwrap();
        assert_eq!(back.entries(), ledger.entries());
        assert!((back.total() - ledger.total()).abs() < 1e-15);
    }
}
