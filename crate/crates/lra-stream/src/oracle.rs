//! Exact per-prefix ground truth: the optimal rank-k cost, an optimal
//! basis, and the singular spectrum after every arrival.
//!
//! Computing this for all n prefixes is cubic-ish and meant for desk-scale
//! runs; the trackers are measured against it, never driven by it.

use crate::error::{Error, Result};
use crate::subspace::FactorBasis;
use crate::svd_update::SvdState;
use crate::streams::StreamSource;

/// Ground truth for one prefix.
#[derive(Clone, Debug)]
pub struct OracleStep {
    /// Optimal rank-k cost of the prefix, with numerical dust at the
    /// exact-rank boundary snapped to 0.
    pub opt: f64,
    /// A cost-optimal basis (top right singular vectors of the prefix).
    pub basis: FactorBasis,
    /// Singular values of the prefix, descending.
    pub singular_values: Vec<f64>,
}

/// Ground truth for every prefix of a stream, indexed by step t = 1..n.
#[derive(Clone, Debug)]
pub struct OracleTrace {
    k: usize,
    steps: Vec<OracleStep>,
}

impl OracleTrace {
    pub fn target_rank(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[OracleStep] {
        &self.steps
    }

    /// Step record for prefix t (1-based, matching stream time).
    pub fn step(&self, t: usize) -> &OracleStep {
        assert!(t >= 1 && t <= self.steps.len(), "step {t} out of range");
        &self.steps[t - 1]
    }

    /// Optimal cost after step t (1-based).
    pub fn opt(&self, t: usize) -> f64 {
        self.step(t).opt
    }
}

/// Evaluates the exact optimum after every arrival of `stream`.
///
/// Maintains one incremental SVD over the prefix; each step reads the
/// tail cost and top-k basis off it. Costs below the rank-detection
/// noise floor are reported as exactly 0 so that "the prefix has rank
/// ≤ k" is a clean predicate downstream.
pub fn oracle_trace(stream: &StreamSource, k: usize) -> Result<OracleTrace> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    let mut svd = SvdState::new(stream.dim());
    let mut steps = Vec::with_capacity(stream.n());
    for t in 0..stream.n() {
        svd = svd.append_row(&stream.row(t))?;
        let tail = svd.tail_cost(k);
        let opt = if tail <= svd.zero_cost_threshold() {
            0.0
        } else {
            tail
        };
        steps.push(OracleStep {
            opt,
            basis: svd.top_basis(k),
            singular_values: svd.singular_values().to_vec(),
        });
    }
    Ok(OracleTrace { k, steps })
}
