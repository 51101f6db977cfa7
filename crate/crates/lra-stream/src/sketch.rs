//! Online row sampling by ridge leverage scores.
//!
//! Each arriving row is kept with probability proportional to its ridge
//! leverage score against the sketch built so far, and kept rows are
//! reweighted by `1/√p` so the sketch's gram matrix stays an unbiased
//! estimate of the full gram matrix. The regularizer λ tracks the sketch's
//! own rank-k tail, so the score of a direction shrinks as the sketch
//! learns it.
//!
//! Sampling decisions are a pure function of `(seed, arrival index, score)`:
//! every arrival draws from its own RNG stream, so a replay of the same
//! stream reproduces the same sample set bit for bit.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::ensure_finite_row;

/// Parameters of the row sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    /// Target rank the sketch must preserve.
    pub k: usize,
    /// Accuracy parameter in (0, 1); sample rate grows as 1/eps².
    pub eps: f64,
    /// Oversampling constant multiplying every keep probability.
    pub oversample: f64,
    /// Lower bound on the ridge regularizer.
    pub lambda_floor: f64,
    /// Seed for the per-arrival decision streams.
    pub seed: u64,
}

impl SketchConfig {
    pub fn new(k: usize, eps: f64, seed: u64) -> Self {
        SketchConfig {
            k,
            eps,
            oversample: 10.0,
            lambda_floor: 1e-9,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be ≥ 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if !(self.oversample > 0.0) || !self.oversample.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "oversampling constant must be positive, got {}",
                self.oversample
            )));
        }
        if !(self.lambda_floor > 0.0) || !self.lambda_floor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "regularizer floor must be positive, got {}",
                self.lambda_floor
            )));
        }
        Ok(())
    }
}

/// Outcome of one arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDecision {
    pub sampled: bool,
    /// Keep probability used for the coin flip.
    pub probability: f64,
    /// Reweighting factor `1/√p` for kept rows, 0 otherwise.
    pub weight: f64,
    /// Ridge leverage score of the row against the prior sketch.
    pub score: f64,
}

/// Streaming leverage-score sampler over rows in `R^d`.
#[derive(Debug, Clone)]
pub struct SketchState {
    config: SketchConfig,
    rows: Vec<DVector<f64>>,
    gram: DMatrix<f64>,
    lambda: f64,
    rows_seen: usize,
}

impl SketchState {
    pub fn new(config: SketchConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
        }
        Ok(SketchState {
            config,
            rows: Vec::new(),
            gram: DMatrix::zeros(dim, dim),
            lambda: config.lambda_floor,
            rows_seen: 0,
        })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Arrivals observed so far (sampled or not).
    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    /// Rows kept so far.
    pub fn kept_count(&self) -> usize {
        self.rows.len()
    }

    /// Current ridge regularizer.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Reweighted kept rows stacked into a matrix.
    pub fn sketch_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.dim());
        for (i, r) in self.rows.iter().enumerate() {
            m.row_mut(i).copy_from(&r.transpose());
        }
        m
    }

    /// Ridge leverage score of `row` against the sketch built from all
    /// earlier arrivals: `min(1, aᵀ(G + λI)⁻¹a)`. The arriving row itself
    /// is not part of `G`.
    pub fn ridge_leverage_score(&self, row: &DVector<f64>) -> Result<f64> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: row.len(),
            });
        }
        ensure_finite_row(row, "scored row")?;
        if row.norm_squared() == 0.0 {
            return Ok(0.0);
        }
        let mut ridged = self.gram.clone();
        for i in 0..self.dim() {
            ridged[(i, i)] += self.lambda;
        }
        let chol = Cholesky::new(ridged).ok_or_else(|| {
            Error::Numerical("ridge matrix lost positive definiteness".into())
        })?;
        let x = chol.solve(row);
        Ok(row.dot(&x).clamp(0.0, 1.0))
    }

    /// Processes one arrival: scores it, flips the seeded coin, and absorbs
    /// the reweighted row on a keep.
    pub fn observe(&mut self, row: &DVector<f64>) -> Result<SampleDecision> {
        let score = self.ridge_leverage_score(row)?;
        let idx = self.rows_seen;
        self.rows_seen += 1;

        let c = self.config;
        let p = (c.oversample * score * c.k as f64 * ((idx + 2) as f64).ln()
            / (c.eps * c.eps))
            .min(1.0);

        let sampled = if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            rng.set_stream(idx as u64);
            rng.gen::<f64>() < p
        };

        if !sampled {
            return Ok(SampleDecision {
                sampled: false,
                probability: p,
                weight: 0.0,
                score,
            });
        }

        let weight = 1.0 / p.sqrt();
        let kept = row * weight;
        self.gram += &kept * kept.transpose();
        self.rows.push(kept);
        self.lambda = (gram_tail(&self.gram, c.k) / c.k as f64).max(c.lambda_floor);
        Ok(SampleDecision {
            sampled: true,
            probability: p,
            weight,
            score,
        })
    }
}

/// Sum of the eigenvalues of a gram matrix beyond the top `k`, i.e. the
/// squared rank-k tail of the underlying row matrix.
pub fn gram_tail(gram: &DMatrix<f64>, k: usize) -> f64 {
    let mut eigs: Vec<f64> = gram
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&x| x.max(0.0))
        .collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    eigs.iter().skip(k).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(k: usize, eps: f64) -> SketchConfig {
        SketchConfig::new(k, eps, 99)
    }

    #[test]
    fn empty_sketch_scores_against_the_floor() {
        // With G = 0 the score is ‖a‖²/λ; a unit row against λ = 2 gives 1/2.
        let mut cfg = config(1, 0.5);
        cfg.lambda_floor = 2.0;
        let s = SketchState::new(cfg, 2).unwrap();
        let tau = s
            .ridge_leverage_score(&DVector::from_vec(vec![1.0, 0.0]))
            .unwrap();
        assert!((tau - 0.5).abs() < 1e-12);
        // Large rows clamp at 1.
        let big = s
            .ridge_leverage_score(&DVector::from_vec(vec![10.0, 0.0]))
            .unwrap();
        assert_eq!(big, 1.0);
    }

    #[test]
    fn probability_formula_is_frozen() {
        let mut cfg = config(1, 0.5);
        cfg.lambda_floor = 2.0;
        cfg.oversample = 0.1;
        let mut s = SketchState::new(cfg, 2).unwrap();
        let dec = s.observe(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        // p = C·τ·k·ln(0 + 2)/eps² = 0.1 · 0.5 · ln 2 / 0.25.
        let expect = 0.1 * 0.5 * std::f64::consts::LN_2 / 0.25;
        assert!((dec.probability - expect).abs() < 1e-15);
        assert!((dec.score - 0.5).abs() < 1e-12);
        if dec.sampled {
            assert!((dec.weight - 1.0 / dec.probability.sqrt()).abs() < 1e-12);
        } else {
            assert_eq!(dec.weight, 0.0);
        }
    }

    #[test]
    fn first_nonzero_row_is_always_kept_at_default_oversampling() {
        let mut s = SketchState::new(config(1, 0.5), 3).unwrap();
        let dec = s.observe(&DVector::from_vec(vec![0.0, 3.0, 0.0])).unwrap();
        assert!(dec.sampled);
        assert_eq!(dec.probability, 1.0);
        assert_eq!(dec.weight, 1.0);
        assert_eq!(s.kept_count(), 1);
    }

    #[test]
    fn zero_rows_are_never_sampled() {
        let mut s = SketchState::new(config(2, 0.5), 3).unwrap();
        let dec = s.observe(&DVector::zeros(3)).unwrap();
        assert!(!dec.sampled);
        assert_eq!(dec.probability, 0.0);
        assert_eq!(dec.score, 0.0);
        assert_eq!(s.rows_seen(), 1);
        assert_eq!(s.kept_count(), 0);
    }

    #[test]
    fn scores_shrink_for_learned_directions_only() {
        let mut cfg = config(1, 0.5);
        cfg.lambda_floor = 2.0;
        let mut s = SketchState::new(cfg, 2).unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        let before_e1 = s.ridge_leverage_score(&e1).unwrap();
        let before_e2 = s.ridge_leverage_score(&e2).unwrap();
        s.observe(&e1).unwrap();
        // k = 1 keeps the rank-1 tail at zero, so λ stays at the floor.
        assert_eq!(s.lambda(), 2.0);
        let after_e1 = s.ridge_leverage_score(&e1).unwrap();
        let after_e2 = s.ridge_leverage_score(&e2).unwrap();
        assert!(after_e1 < before_e1, "{after_e1} vs {before_e1}");
        assert!((after_e2 - before_e2).abs() < 1e-12);
    }

    #[test]
    fn lambda_tracks_the_sketch_tail() {
        let mut cfg = config(1, 0.9);
        cfg.oversample = 100.0; // keep everything
        let mut s = SketchState::new(cfg, 2).unwrap();
        s.observe(&DVector::from_vec(vec![3.0, 0.0])).unwrap();
        assert_eq!(s.lambda(), cfg.lambda_floor);
        s.observe(&DVector::from_vec(vec![0.0, 2.0])).unwrap();
        // Weighted gram is diag(9, 4): rank-1 tail is 4.
        assert!((s.lambda() - 4.0).abs() < 1e-9, "λ = {}", s.lambda());
    }

    #[test]
    fn decisions_replay_exactly() {
        let run = |seed: u64| {
            let mut cfg = config(2, 0.4);
            cfg.seed = seed;
            cfg.oversample = 0.05;
            let mut s = SketchState::new(cfg, 3).unwrap();
            let mut outcomes = Vec::new();
            for i in 0..60 {
                let row = DVector::from_vec(vec![
                    ((i * 7 + 1) % 5) as f64 - 2.0,
                    ((i * 3 + 2) % 7) as f64 - 3.0,
                    ((i * 11) % 3) as f64,
                ]);
                outcomes.push(s.observe(&row).unwrap());
            }
            outcomes
        };
        let a = run(7);
        let b = run(7);
        assert_eq!(a, b);
        let c = run(8);
        assert!(
            a.iter().zip(&c).any(|(x, y)| x.sampled != y.sampled),
            "different seeds should eventually disagree"
        );
    }

    #[test]
    fn gram_matches_sketch_matrix() {
        let mut s = SketchState::new(config(2, 0.5), 3).unwrap();
        for i in 0..20 {
            let row = DVector::from_vec(vec![
                (i % 4) as f64,
                ((i + 1) % 3) as f64 - 1.0,
                1.0,
            ]);
            s.observe(&row).unwrap();
        }
        let b = s.sketch_matrix();
        let err = (b.transpose() * &b - &s.gram).norm();
        assert!(err < 1e-9, "gram drift {err}");
        assert!(s.kept_count() >= 1);
    }

    #[test]
    fn gram_tail_sums_trailing_eigenvalues() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 4.0, 1.0]));
        assert!((gram_tail(&g, 1) - 5.0).abs() < 1e-12);
        assert!((gram_tail(&g, 2) - 1.0).abs() < 1e-12);
        assert_eq!(gram_tail(&g, 5), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(SketchState::new(config(0, 0.5), 2).is_err());
        assert!(SketchState::new(config(1, 0.0), 2).is_err());
        assert!(SketchState::new(config(1, 1.0), 2).is_err());
        assert!(SketchState::new(config(1, 0.5), 0).is_err());
        let mut bad = config(1, 0.5);
        bad.oversample = 0.0;
        assert!(SketchState::new(bad, 2).is_err());
    }
}
