//! Experiment runner: drives one tracker over one stream, measures every
//! step against the exact per-prefix optimum, and serializes the result.
//!
//! Conventions baked in here rather than in the trackers:
//!
//! * Step 1 is charged zero recourse. Standing up the first basis is
//!   setup, not churn; recourse is the cost of *changing* an answer.
//! * `ratio = cost/opt` is `null` whenever the optimum is zero (early
//!   prefixes of rank ≤ k); statistics run over defined ratios only.
//! * Wall-clock is reported per step but never asserted on, and the CSV
//!   dump omits it entirely so identical runs produce identical bytes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    AdditiveState, FdTracker, KappaState, PipelineState, RelativeState, StepEvent, Tracker,
};
use crate::error::{Error, Result};
use crate::ledger::RecourseLedger;
use crate::oracle::oracle_trace;
use crate::sketch::SketchConfig;
use crate::streams::{StreamMeta, StreamSource};
use crate::svd_update::SvdState;

/// Which tracker a run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Additive,
    Relative,
    /// Leverage-score sampler feeding the relative tracker.
    Full,
    /// Exact tracker (optimal subspace after every arrival).
    Kappa,
    /// Frequent Directions baseline.
    Fd,
    /// Exact tracker reported as ground truth: ratio ≡ 1 by construction.
    Oracle,
}

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Additive => "additive",
            Algo::Relative => "relative",
            Algo::Full => "full",
            Algo::Kappa => "kappa",
            Algo::Fd => "fd",
            Algo::Oracle => "oracle",
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(Algo::Additive),
            "relative" => Ok(Algo::Relative),
            "full" => Ok(Algo::Full),
            "kappa" => Ok(Algo::Kappa),
            "fd" => Ok(Algo::Fd),
            "oracle" => Ok(Algo::Oracle),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm '{other}' (expected additive, relative, full, kappa, fd, or oracle)"
            ))),
        }
    }
}

/// Everything a run needs besides the stream itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub k: usize,
    pub eps: f64,
    /// Sampler oversampling constant (full pipeline only).
    pub oversample: f64,
    /// Sampler seed (full pipeline only).
    pub seed: u64,
    /// Frequent Directions buffer size; defaults to 2k+1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_size: Option<usize>,
    /// Default statistics window `[lo, hi]`, 1-based inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(usize, usize)>,
}

impl ExperimentConfig {
    pub fn new(algo: Algo, k: usize, eps: f64) -> Self {
        ExperimentConfig {
            algo,
            k,
            eps,
            oversample: 10.0,
            seed: 0,
            fd_size: None,
            window: None,
        }
    }
}

/// One stream arrival, fully measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based stream time.
    pub t: usize,
    pub event: StepEvent,
    /// Projector mass moved this step (0 at t = 1 by convention).
    pub recourse: f64,
    pub cumulative_recourse: f64,
    /// Cost of the tracker's basis against the full prefix.
    pub cost: f64,
    /// Exact optimal cost of the full prefix.
    pub opt: f64,
    /// cost/opt, or null while the optimum is zero.
    pub ratio: Option<f64>,
    pub recluster_event: bool,
    /// Dimension of the tracked subspace.
    pub basis_dim: usize,
    /// Regime flag for two-mode trackers, absent otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heavy: Option<bool>,
    pub wall_clock_ns: u64,
}

/// Whole-run tallies; fields are absent for trackers they don't apply to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCounters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime_transitions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_swap_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heavy_recluster_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_shrink_count: Option<usize>,
}

/// Full record of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub stream_meta: StreamMeta,
    pub steps: Vec<StepRecord>,
    pub counters: RunCounters,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Report> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat per-step table. Deliberately excludes wall-clock so that two
    /// runs of the same config produce byte-identical dumps.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "t,event,recourse,cumulative_recourse,cost,opt,ratio,recluster_event,basis_dim,heavy\n",
        );
        for s in &self.steps {
            let ratio = s.ratio.map(|r| r.to_string()).unwrap_or_default();
            let heavy = s.heavy.map(|h| h.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                s.t,
                s.event,
                s.recourse,
                s.cumulative_recourse,
                s.cost,
                s.opt,
                ratio,
                s.recluster_event,
                s.basis_dim,
                heavy
            ));
        }
        out
    }

    /// Sum of per-step wall clock (the only sanctioned use of it).
    pub fn total_runtime_ns(&self) -> u64 {
        self.steps.iter().map(|s| s.wall_clock_ns).sum()
    }
}

/// Windowed ratio statistics plus whole-run totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub window: (usize, usize),
    /// Steps inside the window with a defined ratio.
    pub defined_ratio_steps: usize,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    /// Population standard deviation by default; sample (n−1) when the
    /// flag was set.
    pub std: Option<f64>,
    pub max: Option<f64>,
    pub sample_std: bool,
    /// Whole-run totals, not windowed.
    pub total_recourse: f64,
    pub recluster_count: usize,
    pub total_runtime_ns: u64,
}

/// Runs `config.algo` over `stream`, measuring every step against the
/// exact optimum of the corresponding prefix.
pub fn run_experiment(config: &ExperimentConfig, stream: &StreamSource) -> Result<Report> {
    if stream.n() == 0 {
        return Err(Error::InvalidParameter("stream has no rows".into()));
    }
    if let Some((lo, hi)) = config.window {
        if lo < 1 || lo > hi || hi > stream.n() {
            return Err(Error::InvalidParameter(format!(
                "window {lo}:{hi} outside 1..{}",
                stream.n()
            )));
        }
    }
    let dim = stream.dim();
    let truth = oracle_trace(stream, config.k)?;

    let (steps, counters) = match config.algo {
        Algo::Additive => {
            let mut tr = AdditiveState::new(config.k, config.eps, dim)?;
            let (steps, _) = drive(&mut tr, stream, &truth)?;
            (steps, RunCounters::default())
        }
        Algo::Relative => {
            let mut tr = RelativeState::new(config.k, config.eps, dim)?;
            let (steps, transitions) = drive(&mut tr, stream, &truth)?;
            let counters = RunCounters {
                regime_transitions: Some(transitions),
                reset_count: Some(tr.reset_count()),
                light_swap_count: Some(tr.light_swap_count()),
                heavy_recluster_count: Some(tr.heavy_recluster_count()),
                ..RunCounters::default()
            };
            (steps, counters)
        }
        Algo::Full => {
            let mut sk = SketchConfig::new(config.k, config.eps, config.seed);
            sk.oversample = config.oversample;
            let mut tr = PipelineState::new(sk, dim)?;
            let (steps, transitions) = drive(&mut tr, stream, &truth)?;
            let counters = RunCounters {
                samples: Some(tr.samples()),
                observed: Some(tr.observed()),
                regime_transitions: Some(transitions),
                reset_count: Some(tr.inner().reset_count()),
                light_swap_count: Some(tr.inner().light_swap_count()),
                heavy_recluster_count: Some(tr.inner().heavy_recluster_count()),
                ..RunCounters::default()
            };
            (steps, counters)
        }
        Algo::Kappa | Algo::Oracle => {
            let mut tr = KappaState::new(config.k, dim)?;
            let (steps, _) = drive(&mut tr, stream, &truth)?;
            (steps, RunCounters::default())
        }
        Algo::Fd => {
            let mut tr = FdTracker::new(config.k, config.fd_size, dim)?;
            let (steps, _) = drive(&mut tr, stream, &truth)?;
            let counters = RunCounters {
                fd_shrink_count: Some(tr.fd().shrink_count()),
                ..RunCounters::default()
            };
            (steps, counters)
        }
    };

    Ok(Report {
        config: config.clone(),
        stream_meta: stream.meta.clone(),
        steps,
        counters,
    })
}

/// The measurement loop shared by every algorithm: step the tracker,
/// price its basis against the exact prefix, and tally regime flips.
fn drive<T: Tracker>(
    tracker: &mut T,
    stream: &StreamSource,
    truth: &crate::oracle::OracleTrace,
) -> Result<(Vec<StepRecord>, usize)> {
    let mut prefix = SvdState::new(stream.dim());
    let mut ledger = RecourseLedger::new();
    let mut steps = Vec::with_capacity(stream.n());
    let mut prev_mode = tracker.heavy_mode();
    let mut transitions = 0usize;

    for t in 1..=stream.n() {
        let row = stream.row(t - 1);
        let clock = Instant::now();
        let outcome = tracker.step(&row)?;
        let wall_clock_ns = clock.elapsed().as_nanos() as u64;

        let mode = tracker.heavy_mode();
        if let (Some(a), Some(b)) = (prev_mode, mode) {
            if a != b {
                transitions += 1;
            }
        }
        prev_mode = mode;

        // First-arrival convention: standing up the basis is free.
        let recourse = if t == 1 { 0.0 } else { outcome.recourse };
        ledger.record(t, recourse, outcome.event.is_recluster())?;

        prefix = prefix.append_row(&row)?;
        let cost = prefix.cost_against(tracker.basis())?;
        let opt = truth.opt(t);
        let ratio = if opt > 0.0 { Some(cost / opt) } else { None };

        steps.push(StepRecord {
            t,
            event: outcome.event,
            recourse,
            cumulative_recourse: ledger.total(),
            cost,
            opt,
            ratio,
            recluster_event: outcome.event.is_recluster(),
            basis_dim: tracker.basis().span_dim(),
            heavy: mode,
            wall_clock_ns,
        });
    }
    Ok((steps, transitions))
}

/// Ratio statistics over `window` (1-based inclusive; defaults to the
/// config's window, then to the whole run). Totals always cover the
/// whole run.
pub fn summarize(
    report: &Report,
    window: Option<(usize, usize)>,
    sample_std: bool,
) -> Result<SummaryStats> {
    let n = report.steps.len();
    let (lo, hi) = window
        .or(report.config.window)
        .unwrap_or((1, n.max(1)));
    if lo < 1 || lo > hi || hi > n {
        return Err(Error::InvalidParameter(format!(
            "window {lo}:{hi} outside 1..{n}"
        )));
    }

    let mut ratios: Vec<f64> = report.steps[lo - 1..hi]
        .iter()
        .filter_map(|s| s.ratio)
        .collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).expect("ratios are finite"));

    let (median, mean, std, max) = if ratios.is_empty() {
        (None, None, None, None)
    } else {
        let m = ratios.len();
        let median = if m % 2 == 1 {
            ratios[m / 2]
        } else {
            0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
        };
        let mean = ratios.iter().sum::<f64>() / m as f64;
        let ss: f64 = ratios.iter().map(|r| (r - mean) * (r - mean)).sum();
        let std = if sample_std {
            if m >= 2 {
                Some((ss / (m - 1) as f64).sqrt())
            } else {
                None
            }
        } else {
            Some((ss / m as f64).sqrt())
        };
        (Some(median), Some(mean), std, Some(ratios[m - 1]))
    };

    let total_recourse = report
        .steps
        .last()
        .map(|s| s.cumulative_recourse)
        .unwrap_or(0.0);
    let recluster_count = report.steps.iter().filter(|s| s.recluster_event).count();

    Ok(SummaryStats {
        window: (lo, hi),
        defined_ratio_steps: ratios.len(),
        median,
        mean,
        std,
        max,
        sample_std,
        total_recourse,
        recluster_count,
        total_runtime_ns: report.total_runtime_ns(),
    })
}
