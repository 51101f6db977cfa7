//! Subspace kernel: factor bases, spectra, approximation costs, and the
//! recourse metric between output subspaces.
//!
//! A rank-k approximation of a row matrix `A` is carried entirely by a
//! [`FactorBasis`]: a small set of d-dimensional row vectors whose span is
//! the output subspace. Costs are squared Frobenius residuals
//! `‖A − A P‖_F²`, and the distance charged for moving the subspace between
//! steps is `‖P₁ − P₂‖_F²` between the spans' orthogonal projectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below `RANK_REL_TOL · σ₁` count as zero for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-10;
/// Absolute fallback when σ₁ = 0 (the zero matrix).
pub const RANK_ABS_TOL: f64 = 1e-12;

/// Cutoff under which a singular value is treated as numerically zero.
pub fn rank_tolerance(sigma_max: f64) -> f64 {
    if sigma_max > 0.0 {
        RANK_REL_TOL * sigma_max
    } else {
        RANK_ABS_TOL
    }
}

/// Squared-cost scale below which a tail cost is indistinguishable from an
/// exactly rank-deficient prefix: `d` tail values at the rank cutoff.
pub fn zero_cost_threshold(sigma_max: f64, dim: usize) -> f64 {
    let unit = rank_tolerance(sigma_max);
    dim as f64 * unit * unit
}

/// ⌈√k⌉ as an integer, exact for perfect squares.
pub fn ceil_sqrt(k: usize) -> usize {
    let mut r = (k as f64).sqrt().floor() as usize;
    while r * r < k {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= k {
        r -= 1;
    }
    r
}

fn ensure_finite(entries: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    for x in entries {
        if !x.is_finite() {
            return Err(Error::NonFiniteInput(what.to_string()));
        }
    }
    Ok(())
}

pub(crate) fn ensure_finite_matrix(a: &DMatrix<f64>, what: &str) -> Result<()> {
    ensure_finite(a.iter().copied(), what)
}

pub(crate) fn ensure_finite_row(a: &DVector<f64>, what: &str) -> Result<()> {
    ensure_finite(a.iter().copied(), what)
}

/// Orthonormal basis of the row span of `rows`, one basis vector per row of
/// the result. Singular directions below the rank tolerance are dropped.
pub(crate) fn orthonormal_row_span(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let d = rows.ncols();
    if rows.nrows() == 0 {
        return DMatrix::zeros(0, d);
    }
    let svd = rows.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let tol = rank_tolerance(svd.singular_values.max());
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    v_t.rows(0, rank).into_owned()
}

/// A set of `m ≤ k` row vectors in `R^d` whose span is the current output
/// subspace. Bases produced by [`recluster`] are orthonormal; after an
/// in-place vector replacement the set is merely spanning, and every
/// consumer orthonormalizes on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBasis {
    vectors: DMatrix<f64>,
    target_rank: usize,
}

impl FactorBasis {
    /// The empty basis (projector 0) in `R^d` with target rank `k`.
    pub fn empty(ambient_dim: usize, target_rank: usize) -> Self {
        FactorBasis {
            vectors: DMatrix::zeros(0, ambient_dim),
            target_rank,
        }
    }

    /// Wraps `vectors` (one subspace vector per row) without copying.
    pub fn from_rows(vectors: DMatrix<f64>, target_rank: usize) -> Result<Self> {
        if target_rank == 0 {
            return Err(Error::InvalidParameter("target rank must be ≥ 1".into()));
        }
        ensure_finite_matrix(&vectors, "basis vectors")?;
        Ok(FactorBasis {
            vectors,
            target_rank,
        })
    }

    /// Number of stored vectors (not necessarily the span dimension).
    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn target_rank(&self) -> usize {
        self.target_rank
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.row(i).transpose()
    }

    /// Overwrites vector `i`; the basis may stop being orthonormal.
    pub fn replace_vector(&mut self, i: usize, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: v.len(),
            });
        }
        ensure_finite_row(v, "replacement vector")?;
        self.vectors.row_mut(i).copy_from(&v.transpose());
        Ok(())
    }

    /// Orthonormal rows spanning the same subspace.
    pub fn orthonormalized(&self) -> DMatrix<f64> {
        orthonormal_row_span(&self.vectors)
    }

    /// Dimension of the span after orthonormalization.
    pub fn span_dim(&self) -> usize {
        self.orthonormalized().nrows()
    }

    /// The d×d orthogonal projector onto the span. Dense; test/diagnostic use.
    pub fn projector(&self) -> DMatrix<f64> {
        let q = self.orthonormalized();
        q.transpose() * q
    }
}

/// Singular values (padded with zeros to the ambient dimension) and right
/// singular vectors of a matrix, as one immutable view.
#[derive(Debug, Clone)]
pub struct SpectrumView {
    singular_values: Vec<f64>,
    right_vectors: DMatrix<f64>,
}

impl SpectrumView {
    pub fn new(mut singular_values: Vec<f64>, right_vectors: DMatrix<f64>) -> Self {
        let d = right_vectors.ncols();
        singular_values.resize(d.max(singular_values.len()), 0.0);
        SpectrumView {
            singular_values,
            right_vectors,
        }
    }

    /// Nonincreasing σ₁ ≥ … ≥ σ_d ≥ 0.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Right singular vectors as rows, σ-major order; min(n,d) rows.
    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right_vectors
    }

    /// σ_i with 1-based index, zero beyond the stored length.
    pub fn sigma(&self, i: usize) -> f64 {
        if i >= 1 && i <= self.singular_values.len() {
            self.singular_values[i - 1]
        } else {
            0.0
        }
    }
}

/// Full spectrum of `a` via one-shot SVD.
pub fn spectrum(a: &DMatrix<f64>) -> Result<SpectrumView> {
    ensure_finite_matrix(a, "matrix")?;
    if a.nrows() == 0 {
        return Ok(SpectrumView::new(
            vec![0.0; a.ncols()],
            DMatrix::zeros(0, a.ncols()),
        ));
    }
    let svd = a.clone().svd(false, true);
    Ok(SpectrumView::new(
        svd.singular_values.iter().copied().collect(),
        svd.v_t.expect("right singular vectors requested"),
    ))
}

/// Top `min(rank(A), k)` right singular vectors of `A`, the best rank-k
/// output subspace for the rows seen so far.
pub fn recluster(a: &DMatrix<f64>, k: usize) -> Result<FactorBasis> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    ensure_finite_matrix(a, "matrix")?;
    if a.nrows() == 0 {
        return Ok(FactorBasis::empty(a.ncols(), k));
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let tol = rank_tolerance(svd.singular_values.max());
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let m = rank.min(k);
    Ok(FactorBasis {
        vectors: v_t.rows(0, m).into_owned(),
        target_rank: k,
    })
}

/// Residual cost `‖A − A P_V‖_F²` of projecting every row of `A` onto the
/// span of `basis`. Computed from the explicit residual rather than the
/// norm difference, so small costs do not cancel away.
pub fn lra_cost(a: &DMatrix<f64>, basis: &FactorBasis) -> Result<f64> {
    if basis.ambient_dim() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: basis.ambient_dim(),
        });
    }
    ensure_finite_matrix(a, "matrix")?;
    let q = basis.orthonormalized();
    if q.nrows() == 0 {
        return Ok(a.norm_squared());
    }
    let coeffs = a * q.transpose();
    let resid = a - coeffs * q;
    Ok(resid.norm_squared())
}

/// Optimal rank-k approximation cost `Σ_{i>k} σ_i²`.
pub fn opt_cost(a: &DMatrix<f64>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    ensure_finite_matrix(a, "matrix")?;
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let sv = a.clone().svd(false, false).singular_values;
    Ok(sv.iter().skip(k).map(|s| s * s).sum())
}

/// Squared Frobenius distance `‖P₁ − P₂‖_F²` between the spans' projectors,
/// computed as `Tr(P₁) + Tr(P₂) − 2 Tr(P₁P₂)` on orthonormalized bases.
pub fn recourse(v1: &FactorBasis, v2: &FactorBasis) -> Result<f64> {
    if v1.ambient_dim() != v2.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: v1.ambient_dim(),
            got: v2.ambient_dim(),
        });
    }
    let q1 = v1.orthonormalized();
    let q2 = v2.orthonormalized();
    let (m1, m2) = (q1.nrows() as f64, q2.nrows() as f64);
    // Tr(P₁P₂) = ‖Q₂Q₁ᵀ‖_F² for row-orthonormal Q₁, Q₂.
    let overlap = (q2 * q1.transpose()).norm_squared();
    let r = m1 + m2 - 2.0 * overlap;
    Ok(r.max(0.0))
}

/// Reference implementation of [`recourse`] that materializes both d×d
/// projectors. Quadratic in `d`; kept as the cross-check for the trace
/// formula and for small diagnostics.
pub fn recourse_via_projectors(v1: &FactorBasis, v2: &FactorBasis) -> Result<f64> {
    if v1.ambient_dim() != v2.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: v1.ambient_dim(),
            got: v2.ambient_dim(),
        });
    }
    let diff = v1.projector() - v2.projector();
    Ok(diff.norm_squared())
}

/// Mass `Σ_{i=lo}^{k} σ_i²` of the band of singular values just above the
/// rank-k cutoff, with `lo = max(1, k − ⌈√k⌉)`. This is the quantity whose
/// size selects the heavy (recluster-on-demand) regime.
pub fn tail_band_mass(spectrum: &SpectrumView, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    let lo = 1.max(k.saturating_sub(ceil_sqrt(k)).max(1));
    let mut mass = 0.0;
    for i in lo..=k {
        let s = spectrum.sigma(i);
        mass += s * s;
    }
    Ok(mass)
}
