//! The streaming trackers. Each one consumes rows and maintains a
//! factor basis whose movement is the quantity under study:
//!
//! * [`AdditiveState`]: reclusters when the squared Frobenius mass has
//!   grown by (1+ε); cost is optimal up to an additive ε·‖A‖_F².
//! * [`RelativeState`]: epoch/counter scheme with a heavy/light regime
//!   switch; cost stays within (1+ε/2) of optimal.
//! * [`PipelineState`]: leverage-score sampler feeding a [`RelativeState`]
//!   so recourse scales with the sketch size, not the stream length.
//! * [`KappaState`]: exact tracker that recomputes the optimal subspace
//!   after every arrival.
//! * [`FdTracker`]: Frequent Directions baseline over a bounded buffer.
//!
//! Trackers return their raw basis movement per step; how the first
//! arrival is charged is a reporting-layer decision, not made here.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{default_size, FdState};
use crate::sketch::{SketchConfig, SketchState};
use crate::subspace::{ceil_sqrt, ensure_finite_row, recourse, tail_band_mass, FactorBasis};
use crate::svd_update::SvdState;

/// What a tracker did with an arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    /// Kept the current basis (possibly after an exact refresh with no
    /// scheduled rebuild, as in the exact tracker).
    Hold,
    /// Row was not ingested (zero row, or not sampled by the pipeline).
    Skipped,
    /// Scheduled full rebuild of the basis from the prefix.
    Recluster,
    /// Light-regime swap of a single basis vector.
    LightSwap,
    /// Heavy-regime rebuild triggered by cost drift.
    HeavyRecluster,
}

impl StepEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepEvent::Hold => "hold",
            StepEvent::Skipped => "skipped",
            StepEvent::Recluster => "recluster",
            StepEvent::LightSwap => "light_swap",
            StepEvent::HeavyRecluster => "heavy_recluster",
        }
    }

    /// True for the events that rebuild the whole basis.
    pub fn is_recluster(&self) -> bool {
        matches!(self, StepEvent::Recluster | StepEvent::HeavyRecluster)
    }
}

impl std::fmt::Display for StepEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn ensure_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
    }
    Ok(())
}

/// Per-arrival result: what happened and how much projector mass moved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub event: StepEvent,
    pub recourse: f64,
}

impl StepOutcome {
    fn hold() -> Self {
        StepOutcome {
            event: StepEvent::Hold,
            recourse: 0.0,
        }
    }

    fn skipped() -> Self {
        StepOutcome {
            event: StepEvent::Skipped,
            recourse: 0.0,
        }
    }
}

/// Common surface of the streaming trackers.
pub trait Tracker {
    /// Ingest one row and report the basis movement it caused.
    fn step(&mut self, row: &DVector<f64>) -> Result<StepOutcome>;

    /// Current factor basis (a spanning set; orthonormalized on demand).
    fn basis(&self) -> &FactorBasis;

    /// Ambient dimension of accepted rows.
    fn dim(&self) -> usize;

    /// Target rank k.
    fn target_rank(&self) -> usize;

    /// Regime flag for trackers with a two-mode controller.
    fn heavy_mode(&self) -> Option<bool> {
        None
    }
}

/// Tracker with additive error ε·‖A‖_F²: rebuild only when the total
/// squared mass has grown by a (1+ε) factor since the last rebuild.
#[derive(Debug, Clone)]
pub struct AdditiveState {
    k: usize,
    eps: f64,
    prefix: SvdState,
    basis: FactorBasis,
    /// Squared Frobenius mass at the last rebuild.
    threshold: f64,
    recluster_count: usize,
}

impl AdditiveState {
    /// Any finite ε > 0 is meaningful here; large ε just reclusters less.
    pub fn new(k: usize, eps: f64, dim: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be ≥ 1".into()));
        }
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eps must be positive and finite, got {eps}"
            )));
        }
        ensure_dim(dim)?;
        Ok(AdditiveState {
            k,
            eps,
            prefix: SvdState::new(dim),
            basis: FactorBasis::empty(dim, k),
            threshold: 0.0,
            recluster_count: 0,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn frob_sq(&self) -> f64 {
        self.prefix.frob_sq()
    }

    pub fn recluster_count(&self) -> usize {
        self.recluster_count
    }

    pub fn prefix(&self) -> &SvdState {
        &self.prefix
    }
}

impl Tracker for AdditiveState {
    fn step(&mut self, row: &DVector<f64>) -> Result<StepOutcome> {
        self.prefix = self.prefix.append_row(row)?;
        let frob = self.prefix.frob_sq();
        // The mass test starts only once something nonzero has arrived;
        // an all-zero prefix has nothing to factor.
        if frob > 0.0 && frob >= (1.0 + self.eps) * self.threshold {
            let next = self.prefix.top_basis(self.k);
            let moved = recourse(&self.basis, &next)?;
            self.basis = next;
            self.threshold = frob;
            self.recluster_count += 1;
            return Ok(StepOutcome {
                event: StepEvent::Recluster,
                recourse: moved,
            });
        }
        Ok(StepOutcome::hold())
    }

    fn basis(&self) -> &FactorBasis {
        &self.basis
    }

    fn dim(&self) -> usize {
        self.prefix.dim()
    }

    fn target_rank(&self) -> usize {
        self.k
    }
}

/// Tracker with (1+ε/2) relative error and sublinear recourse.
///
/// Runs in epochs delimited by growth of the optimal cost. Inside an
/// epoch the behavior depends on how much mass the band of singular
/// values just below the cut carries. When the band is light, arriving
/// rows overwrite the least-loaded basis vector (cheap, bounded swaps);
/// when it is heavy, the basis is rebuilt outright, but only when its
/// cost has drifted a (1+ε/2) factor above optimal, which the band mass
/// makes a rare event.
#[derive(Debug, Clone)]
pub struct RelativeState {
    k: usize,
    eps: f64,
    ceil_sqrt_k: usize,
    /// Exact factorization of all nonzero rows seen so far.
    prefix: SvdState,
    /// Prefix frozen at the last rebuild time s; light swaps rank basis
    /// vectors by their mass under this snapshot.
    snapshot: SvdState,
    basis: FactorBasis,
    /// Epoch baseline C: the optimal cost at the last rebuild.
    baseline: f64,
    /// Within-epoch move counter c.
    counter: usize,
    heavy: bool,
    nonzero_steps: usize,
    reset_count: usize,
    light_swap_count: usize,
    heavy_recluster_count: usize,
}

impl RelativeState {
    pub fn new(k: usize, eps: f64, dim: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be ≥ 1".into()));
        }
        if !eps.is_finite() || !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 1), got {eps}"
            )));
        }
        ensure_dim(dim)?;
        let prefix = SvdState::new(dim);
        Ok(RelativeState {
            k,
            eps,
            ceil_sqrt_k: ceil_sqrt(k),
            snapshot: prefix.clone(),
            prefix,
            basis: FactorBasis::empty(dim, k),
            baseline: 0.0,
            counter: 0,
            heavy: true,
            nonzero_steps: 0,
            reset_count: 0,
            light_swap_count: 0,
            heavy_recluster_count: 0,
        })
    }

    /// Optimal cost of the current prefix, with rank-boundary dust
    /// snapped to an exact zero.
    pub fn current_opt(&self) -> f64 {
        let tail = self.prefix.tail_cost(self.k);
        if tail <= self.prefix.zero_cost_threshold() {
            0.0
        } else {
            tail
        }
    }

    /// Cost of the held basis on the current prefix.
    pub fn current_cost(&self) -> Result<f64> {
        self.prefix.cost_against(&self.basis)
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn counter(&self) -> usize {
        self.counter
    }

    pub fn is_heavy(&self) -> bool {
        self.heavy
    }

    pub fn reset_count(&self) -> usize {
        self.reset_count
    }

    pub fn light_swap_count(&self) -> usize {
        self.light_swap_count
    }

    pub fn heavy_recluster_count(&self) -> usize {
        self.heavy_recluster_count
    }

    /// Nonzero rows ingested (zero rows are skipped, not counted).
    pub fn nonzero_steps(&self) -> usize {
        self.nonzero_steps
    }

    pub fn prefix(&self) -> &SvdState {
        &self.prefix
    }

    fn rebuild(&mut self, event: StepEvent) -> Result<StepOutcome> {
        let next = self.prefix.top_basis(self.k);
        let moved = recourse(&self.basis, &next)?;
        self.basis = next;
        Ok(StepOutcome {
            event,
            recourse: moved,
        })
    }
}

impl Tracker for RelativeState {
    fn step(&mut self, row: &DVector<f64>) -> Result<StepOutcome> {
        if row.len() != self.prefix.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.prefix.dim(),
                got: row.len(),
            });
        }
        ensure_finite_row(row, "row")?;
        if row.iter().all(|&x| x == 0.0) {
            return Ok(StepOutcome::skipped());
        }

        self.prefix = self.prefix.append_row(row)?;
        self.nonzero_steps += 1;
        let opt = self.current_opt();

        // Epoch reset: the optimum outgrew the baseline, or the move
        // counter hit its per-regime budget. Note C=0 epochs reset on
        // every arrival (0 ≥ (1+ε/4)·0), which keeps the basis equal to
        // the whole row span while the prefix still has rank ≤ k.
        let budget = if self.heavy { self.k } else { self.ceil_sqrt_k };
        if opt >= (1.0 + self.eps / 4.0) * self.baseline || self.counter == budget {
            let out = self.rebuild(StepEvent::Recluster)?;
            self.baseline = opt;
            self.counter = 0;
            self.snapshot = self.prefix.clone();
            let band = tail_band_mass(&self.prefix.spectrum_view(), self.k)?;
            self.heavy = band >= (self.eps / 3.0) * self.baseline;
            self.reset_count += 1;
            return Ok(out);
        }

        if !self.heavy {
            // Light regime: overwrite the basis vector carrying the least
            // mass under the snapshot. Ties break to the lowest index.
            debug_assert!(!self.basis.is_empty(), "light regime with empty basis");
            let mut lightest = 0;
            let mut lightest_mass = f64::INFINITY;
            for i in 0..self.basis.len() {
                let mass = self.snapshot.weighted_row_mass(&self.basis.vector(i));
                if mass < lightest_mass {
                    lightest_mass = mass;
                    lightest = i;
                }
            }
            let unit = row / row.norm();
            let before = self.basis.clone();
            self.basis.replace_vector(lightest, &unit)?;
            let moved = recourse(&before, &self.basis)?;
            self.counter += 1;
            self.light_swap_count += 1;
            return Ok(StepOutcome {
                event: StepEvent::LightSwap,
                recourse: moved,
            });
        }

        // Heavy regime: hold until the basis has demonstrably drifted.
        let cost = self.prefix.cost_against(&self.basis)?;
        if cost >= (1.0 + self.eps / 2.0) * opt {
            let out = self.rebuild(StepEvent::HeavyRecluster)?;
            self.counter += 1;
            self.heavy_recluster_count += 1;
            return Ok(out);
        }
        Ok(StepOutcome::hold())
    }

    fn basis(&self) -> &FactorBasis {
        &self.basis
    }

    fn dim(&self) -> usize {
        self.prefix.dim()
    }

    fn target_rank(&self) -> usize {
        self.k
    }

    fn heavy_mode(&self) -> Option<bool> {
        Some(self.heavy)
    }
}

/// Exact tracker: the optimal subspace after every arrival, maintained
/// by rank-one factorization updates. Its recourse is small as long as
/// consecutive optima stay close, which single-row appends guarantee.
#[derive(Debug, Clone)]
pub struct KappaState {
    k: usize,
    svd: SvdState,
    basis: FactorBasis,
}

impl KappaState {
    pub fn new(k: usize, dim: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be ≥ 1".into()));
        }
        ensure_dim(dim)?;
        Ok(KappaState {
            k,
            svd: SvdState::new(dim),
            basis: FactorBasis::empty(dim, k),
        })
    }

    pub fn svd(&self) -> &SvdState {
        &self.svd
    }
}

impl Tracker for KappaState {
    fn step(&mut self, row: &DVector<f64>) -> Result<StepOutcome> {
        self.svd = self.svd.append_row(row)?;
        let next = self.svd.top_basis(self.k);
        let moved = recourse(&self.basis, &next)?;
        self.basis = next;
        Ok(StepOutcome {
            event: StepEvent::Hold,
            recourse: moved,
        })
    }

    fn basis(&self) -> &FactorBasis {
        &self.basis
    }

    fn dim(&self) -> usize {
        self.svd.dim()
    }

    fn target_rank(&self) -> usize {
        self.k
    }
}

/// Leverage-score sampler in front of a relative-error tracker: rows the
/// sampler drops cost exactly zero recourse, so total basis movement is
/// governed by the sketch size rather than the stream length.
#[derive(Debug, Clone)]
pub struct PipelineState {
    sketch: SketchState,
    inner: RelativeState,
    observed: usize,
    samples: usize,
}

impl PipelineState {
    pub fn new(config: SketchConfig, dim: usize) -> Result<Self> {
        let inner = RelativeState::new(config.k, config.eps, dim)?;
        Ok(PipelineState {
            sketch: SketchState::new(config, dim)?,
            inner,
            observed: 0,
            samples: 0,
        })
    }

    /// Rows offered to the sampler.
    pub fn observed(&self) -> usize {
        self.observed
    }

    /// Rows the sampler kept and fed through.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn sketch(&self) -> &SketchState {
        &self.sketch
    }

    pub fn inner(&self) -> &RelativeState {
        &self.inner
    }
}

impl Tracker for PipelineState {
    fn step(&mut self, row: &DVector<f64>) -> Result<StepOutcome> {
        let decision = self.sketch.observe(row)?;
        self.observed += 1;
        if !decision.sampled {
            return Ok(StepOutcome::skipped());
        }
        self.samples += 1;
        let reweighted = row * decision.weight;
        self.inner.step(&reweighted)
    }

    fn basis(&self) -> &FactorBasis {
        self.inner.basis()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn target_rank(&self) -> usize {
        self.inner.target_rank()
    }

    fn heavy_mode(&self) -> Option<bool> {
        Some(self.inner.is_heavy())
    }
}

/// Frequent Directions baseline: top-k of a shrinking sketch buffer.
/// Every buffer shrink perturbs the whole spectrum, which is exactly the
/// churn the consistent trackers avoid; this exists to be measured
/// against, not to win.
#[derive(Debug, Clone)]
pub struct FdTracker {
    k: usize,
    fd: FdState,
    basis: FactorBasis,
}

impl FdTracker {
    /// `size` defaults to 2k+1 and must exceed k, or the sketch could
    /// not even represent the subspace it is asked for.
    pub fn new(k: usize, size: Option<usize>, dim: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be ≥ 1".into()));
        }
        let size = size.unwrap_or_else(|| default_size(k));
        if size <= k {
            return Err(Error::InvalidParameter(format!(
                "sketch size must exceed k = {k}, got {size}"
            )));
        }
        Ok(FdTracker {
            k,
            fd: FdState::new(size, dim)?,
            basis: FactorBasis::empty(dim, k),
        })
    }

    pub fn fd(&self) -> &FdState {
        &self.fd
    }
}

impl Tracker for FdTracker {
    fn step(&mut self, row: &DVector<f64>) -> Result<StepOutcome> {
        let shrinks_before = self.fd.shrink_count();
        self.fd.insert(row)?;
        let next = self.fd.top_basis(self.k)?;
        let moved = recourse(&self.basis, &next)?;
        self.basis = next;
        let event = if self.fd.shrink_count() > shrinks_before {
            StepEvent::Recluster
        } else {
            StepEvent::Hold
        };
        Ok(StepOutcome {
            event,
            recourse: moved,
        })
    }

    fn basis(&self) -> &FactorBasis {
        &self.basis
    }

    fn dim(&self) -> usize {
        self.fd.dim()
    }

    fn target_rank(&self) -> usize {
        self.k
    }
}
