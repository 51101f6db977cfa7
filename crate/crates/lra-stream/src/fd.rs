//! Frequent-directions sketch of a row stream.
//!
//! A fixed ℓ×d buffer absorbs rows one at a time; whenever it fills, the
//! buffer is rotated into its own singular basis and every direction loses
//! σ_ℓ² of squared mass, zeroing at least the weakest row. The sketch `B`
//! satisfies `‖AᵀA − BᵀB‖₂ ≤ Σ shrink losses ≤ ‖A‖_F² / (ℓ − k)` for any
//! `k < ℓ`.
//!
//! Serving rank-k subspaces straight off this sketch is the natural
//! baseline tracker: accurate, but its basis swings freely at every
//! shrink, which is exactly the behavior the recourse-aware algorithms
//! are measured against.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::subspace::{ensure_finite_row, recluster, FactorBasis};

/// Standard buffer size giving error at most `‖A‖_F² / (k + 1)` for rank k.
pub fn default_size(k: usize) -> usize {
    2 * k + 1
}

/// Streaming ℓ×d frequent-directions buffer.
#[derive(Debug, Clone)]
pub struct FdState {
    buffer: DMatrix<f64>,
    size: usize,
    filled: usize,
    rows_seen: usize,
    shrink_count: usize,
    shed_total: f64,
}

impl FdState {
    pub fn new(size: usize, dim: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidParameter(format!(
                "sketch size must be ≥ 2, got {size}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
        }
        Ok(FdState {
            buffer: DMatrix::zeros(size, dim),
            size,
            filled: 0,
            rows_seen: 0,
            shrink_count: 0,
            shed_total: 0.0,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.buffer.ncols()
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    /// Number of occupied buffer rows; always < `size` between inserts.
    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn shrink_count(&self) -> usize {
        self.shrink_count
    }

    /// Total squared mass removed by shrinks so far. This value bounds
    /// `‖AᵀA − BᵀB‖₂` from above.
    pub fn shed_total(&self) -> f64 {
        self.shed_total
    }

    /// The occupied rows of the sketch, `filled × d`.
    pub fn sketch(&self) -> DMatrix<f64> {
        self.buffer.rows(0, self.filled).into_owned()
    }

    /// Best rank-k basis of the current sketch.
    pub fn top_basis(&self, k: usize) -> Result<FactorBasis> {
        recluster(&self.sketch(), k)
    }

    /// Absorbs one row, shrinking if the buffer fills.
    pub fn insert(&mut self, row: &DVector<f64>) -> Result<()> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: row.len(),
            });
        }
        ensure_finite_row(row, "inserted row")?;
        self.rows_seen += 1;
        if row.norm_squared() == 0.0 {
            return Ok(());
        }
        self.buffer.row_mut(self.filled).copy_from(&row.transpose());
        self.filled += 1;
        if self.filled == self.size {
            self.shrink();
        }
        Ok(())
    }

    /// Rotates the buffer into its singular basis and sheds σ_ℓ² from every
    /// squared singular value. Zeroes at least one row, so the buffer is
    /// never full on return.
    fn shrink(&mut self) {
        let svd = self.buffer.clone().svd(false, true);
        let sv = svd.singular_values;
        let v_t = svd.v_t.expect("right singular vectors requested");
        let delta = if sv.len() < self.size {
            0.0
        } else {
            let s = sv[self.size - 1];
            s * s
        };
        self.buffer.fill(0.0);
        let mut kept = 0;
        for i in 0..sv.len() {
            let reduced = (sv[i] * sv[i] - delta).max(0.0);
            if reduced > 0.0 {
                let scale = reduced.sqrt();
                self.buffer.row_mut(kept).copy_from(&(v_t.row(i) * scale));
                kept += 1;
            }
        }
        self.filled = kept;
        self.shrink_count += 1;
        self.shed_total += delta;
        debug_assert!(self.filled < self.size);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spectral_norm(m: &DMatrix<f64>) -> f64 {
        let sv = m.clone().svd(false, false).singular_values;
        if sv.is_empty() {
            0.0
        } else {
            sv[0]
        }
    }

    fn gram(m: &DMatrix<f64>) -> DMatrix<f64> {
        m.transpose() * m
    }

    #[test]
    fn default_size_leaves_headroom() {
        assert_eq!(default_size(1), 3);
        assert_eq!(default_size(3), 7);
    }

    #[test]
    fn exact_until_first_fill() {
        let mut fd = FdState::new(4, 3).unwrap();
        let rows = [
            DVector::from_vec(vec![1.0, 0.0, 2.0]),
            DVector::from_vec(vec![0.0, -1.0, 1.0]),
            DVector::from_vec(vec![3.0, 1.0, 0.0]),
        ];
        for r in &rows {
            fd.insert(r).unwrap();
        }
        assert_eq!(fd.filled(), 3);
        assert_eq!(fd.shrink_count(), 0);
        let sketch = fd.sketch();
        for (i, r) in rows.iter().enumerate() {
            assert!((sketch.row(i).transpose() - r).norm() < 1e-15);
        }
    }

    #[test]
    fn orthogonal_fill_sheds_everything() {
        // Two orthonormal rows in a size-2 buffer: σ = {1, 1}, so the shrink
        // removes δ = 1 from both directions and empties the sketch.
        let mut fd = FdState::new(2, 2).unwrap();
        fd.insert(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        fd.insert(&DVector::from_vec(vec![0.0, 1.0])).unwrap();
        assert_eq!(fd.shrink_count(), 1);
        assert_eq!(fd.filled(), 0);
        assert!((fd.shed_total() - 1.0).abs() < 1e-12);
        // ‖AᵀA − BᵀB‖₂ = ‖I − 0‖₂ = 1 ≤ ‖A‖_F² / (ℓ − k) = 2.
        let diff = DMatrix::identity(2, 2) - gram(&fd.sketch());
        assert!((spectral_norm(&diff) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_buffer_is_lossless() {
        // Buffer larger than the ambient dimension: rank can never reach ℓ,
        // every shrink has δ = 0, and the gram matrix is preserved exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut fd = FdState::new(4, 2).unwrap();
        let mut stacked = DMatrix::zeros(0, 2);
        for _ in 0..30 {
            let row = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            fd.insert(&row).unwrap();
            stacked = DMatrix::from_fn(stacked.nrows() + 1, 2, |i, j| {
                if i < stacked.nrows() {
                    stacked[(i, j)]
                } else {
                    row[j]
                }
            });
        }
        assert_eq!(fd.shed_total(), 0.0);
        let err = (gram(&fd.sketch()) - gram(&stacked)).norm();
        assert!(err < 1e-10 * stacked.norm_squared(), "gram drift {err}");
    }

    #[test]
    fn covariance_error_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (n, d, size, k) = (40, 6, 5, 2);
        let mut fd = FdState::new(size, d).unwrap();
        let a = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..n {
            fd.insert(&a.row(i).transpose()).unwrap();
        }
        assert!(fd.shrink_count() > 0);
        let err = spectral_norm(&(gram(&a) - gram(&fd.sketch())));
        let budget = a.norm_squared() / (size - k) as f64;
        // Spectral error ≤ accumulated shrink loss ≤ ‖A‖_F² / (ℓ − k).
        assert!(
            err <= fd.shed_total() + 1e-9,
            "covariance error {err} exceeds shed mass {}",
            fd.shed_total()
        );
        assert!(
            fd.shed_total() <= budget + 1e-9,
            "shed mass {} exceeds {budget}",
            fd.shed_total()
        );
    }

    #[test]
    fn zero_rows_cost_nothing() {
        let mut fd = FdState::new(3, 2).unwrap();
        for _ in 0..10 {
            fd.insert(&DVector::zeros(2)).unwrap();
        }
        assert_eq!(fd.rows_seen(), 10);
        assert_eq!(fd.filled(), 0);
        assert_eq!(fd.shrink_count(), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FdState::new(1, 2).is_err());
        assert!(FdState::new(3, 0).is_err());
        let mut fd = FdState::new(3, 2).unwrap();
        assert!(fd.insert(&DVector::from_vec(vec![1.0])).is_err());
        assert!(fd
            .insert(&DVector::from_vec(vec![1.0, f64::INFINITY]))
            .is_err());
    }

    #[test]
    fn top_basis_tracks_dominant_direction() {
        let mut fd = FdState::new(3, 2).unwrap();
        for _ in 0..6 {
            fd.insert(&DVector::from_vec(vec![2.0, 0.0])).unwrap();
            fd.insert(&DVector::from_vec(vec![0.0, 0.5])).unwrap();
        }
        let basis = fd.top_basis(1).unwrap();
        let e1 = FactorBasis::from_rows(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), 1).unwrap();
        assert!(crate::subspace::recourse(&basis, &e1).unwrap() < 1e-9);
    }
}
