//! Incremental thin SVD of a growing row matrix.
//!
//! [`SvdState`] holds `A ≈ U · diag(Σ) · V` with `U` column-orthonormal
//! (n×r), `Σ` descending, and `V` row-orthonormal (r×d). Appending a row
//! projects it onto the current right space, forms an (r+1)×(r+1) core,
//! and re-diagonalizes the core, so a step costs O((n+d)r + r³) instead of
//! a fresh SVD. Drift is bounded by a full re-orthonormalization every
//! [`REORTH_PERIOD`] updates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::subspace::{
    ensure_finite_row, rank_tolerance, zero_cost_threshold, FactorBasis, SpectrumView,
};

/// Updates between full re-orthonormalizations of the factors.
pub const REORTH_PERIOD: usize = 64;

/// Residual components below `KEEP_REL_TOL · scale` are dropped instead of
/// growing the rank. Deliberately tighter than the rank-decision tolerance:
/// what is dropped here is lost from the reconstruction forever.
const KEEP_REL_TOL: f64 = 1e-12;

/// Thin SVD factorization of all rows appended so far.
#[derive(Debug, Clone)]
pub struct SvdState {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v_t: DMatrix<f64>,
    rows: usize,
    updates_since_reorth: usize,
}

impl SvdState {
    /// Factorization of the empty 0×d matrix.
    pub fn new(dim: usize) -> Self {
        SvdState {
            u: DMatrix::zeros(0, 0),
            sigma: DVector::zeros(0),
            v_t: DMatrix::zeros(0, dim),
            rows: 0,
            updates_since_reorth: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.v_t.ncols()
    }

    /// Number of rows appended so far.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Numerical rank under the shared rank tolerance.
    pub fn rank(&self) -> usize {
        if self.sigma.is_empty() {
            return 0;
        }
        let tol = rank_tolerance(self.sigma[0]);
        self.sigma.iter().filter(|&&s| s > tol).count()
    }

    /// Descending singular values (length = stored factor rank).
    pub fn singular_values(&self) -> &[f64] {
        self.sigma.as_slice()
    }

    /// Right singular vectors as rows, σ-major order.
    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.v_t
    }

    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Returns the state with `row` appended; `self` is untouched, so
    /// snapshots of earlier prefixes stay valid.
    pub fn append_row(&self, row: &DVector<f64>) -> Result<SvdState> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: row.len(),
            });
        }
        ensure_finite_row(row, "appended row")?;
        let rows = self.rows + 1;
        let norm = row.norm();

        // A zero row pads U and changes nothing else.
        if norm == 0.0 {
            let mut next = self.clone();
            next.u = pad_bottom(&self.u, 1);
            next.rows = rows;
            return Ok(next);
        }

        let r = self.sigma.len();
        if r == 0 {
            let mut u = DMatrix::zeros(rows, 1);
            u[(rows - 1, 0)] = 1.0;
            let unit = row / norm;
            return Ok(SvdState {
                u,
                sigma: DVector::from_element(1, norm),
                v_t: DMatrix::from_row_slice(1, self.dim(), unit.as_slice()),
                rows,
                updates_since_reorth: self.updates_since_reorth + 1,
            }
            .maybe_reorth());
        }

        let coeffs = &self.v_t * row;
        let resid = row - self.v_t.transpose() * &coeffs;
        let rho = resid.norm();
        let keep_tol = KEEP_REL_TOL * self.sigma[0].max(norm);

        let next = if rho > keep_tol {
            // The row leaves the current right space: rank grows by one.
            let core = {
                let mut k = DMatrix::zeros(r + 1, r + 1);
                for i in 0..r {
                    k[(i, i)] = self.sigma[i];
                    k[(r, i)] = coeffs[i];
                }
                k[(r, r)] = rho;
                k
            };
            let (f, sigma, g_rows) = core_svd(core);
            let mut v_ext = DMatrix::zeros(r + 1, self.dim());
            v_ext.view_mut((0, 0), (r, self.dim())).copy_from(&self.v_t);
            v_ext.row_mut(r).copy_from(&(resid / rho).transpose());
            SvdState {
                u: pad_bottom_unit(&self.u) * f,
                sigma,
                v_t: g_rows * v_ext,
                rows,
                updates_since_reorth: self.updates_since_reorth + 1,
            }
        } else {
            // The row lies in the current right space: same rank, new mixing.
            let core = {
                let mut k = DMatrix::zeros(r + 1, r);
                for i in 0..r {
                    k[(i, i)] = self.sigma[i];
                    k[(r, i)] = coeffs[i];
                }
                k
            };
            let (f, sigma, g_rows) = core_svd(core);
            SvdState {
                u: pad_bottom_unit(&self.u) * f,
                sigma,
                v_t: g_rows * &self.v_t,
                rows,
                updates_since_reorth: self.updates_since_reorth + 1,
            }
        };
        Ok(next.maybe_reorth())
    }

    fn maybe_reorth(mut self) -> SvdState {
        if self.updates_since_reorth >= REORTH_PERIOD {
            self = self.reorthonormalized();
        }
        self
    }

    /// Re-orthonormalizes both factors and re-diagonalizes, discarding
    /// accumulated drift. The represented matrix is unchanged.
    pub fn reorthonormalized(&self) -> SvdState {
        let r = self.sigma.len();
        if r == 0 {
            let mut next = self.clone();
            next.updates_since_reorth = 0;
            return next;
        }
        // U = Qu·Ru (Gram-Schmidt; U is near-orthonormal, so this is stable),
        // then fold Ru into the core and re-diagonalize.
        let (qu, ru) = gram_schmidt_columns(&self.u);
        let core = ru * DMatrix::from_diagonal(&self.sigma) * &self.v_t; // r×d
        let (f, sigma, g_rows) = core_svd(core);
        SvdState {
            u: qu * f,
            sigma,
            v_t: g_rows,
            rows: self.rows,
            updates_since_reorth: 0,
        }
    }

    /// Top `min(rank, k)` right singular vectors as a basis with target
    /// rank `k`.
    pub fn top_basis(&self, k: usize) -> FactorBasis {
        let m = self.rank().min(k);
        FactorBasis::from_rows(self.v_t.rows(0, m).into_owned(), k.max(1))
            .expect("stored factors are finite")
    }

    /// Optimal rank-k cost of the represented matrix: `Σ_{i>k} σ_i²`.
    pub fn tail_cost(&self, k: usize) -> f64 {
        self.sigma.iter().skip(k).map(|s| s * s).sum()
    }

    /// `‖A‖_F²` of the represented matrix.
    pub fn frob_sq(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum()
    }

    /// Scale under which a cost on this matrix is numerically zero.
    pub fn zero_cost_threshold(&self) -> f64 {
        let sigma_max = if self.sigma.is_empty() { 0.0 } else { self.sigma[0] };
        zero_cost_threshold(sigma_max, self.dim())
    }

    pub fn spectrum_view(&self) -> SpectrumView {
        SpectrumView::new(self.sigma.iter().copied().collect(), self.v_t.clone())
    }

    /// `‖A v‖²` for a unit direction `v`, without touching `U`:
    /// `‖diag(Σ) · (V vᵀ)‖²`.
    pub fn weighted_row_mass(&self, v: &DVector<f64>) -> f64 {
        let coeffs = &self.v_t * v;
        coeffs
            .iter()
            .zip(self.sigma.iter())
            .map(|(c, s)| (c * s) * (c * s))
            .sum()
    }

    /// `‖A − A P‖_F²` against the span of `basis`, evaluated on the compact
    /// factor `diag(Σ)·V` so the residual never cancels against `‖A‖²`.
    pub fn cost_against(&self, basis: &FactorBasis) -> Result<f64> {
        if basis.ambient_dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: basis.ambient_dim(),
            });
        }
        let q = basis.orthonormalized();
        let b = DMatrix::from_diagonal(&self.sigma) * &self.v_t; // r×d
        if q.nrows() == 0 {
            return Ok(b.norm_squared());
        }
        let resid = &b - (&b * q.transpose()) * q;
        Ok(resid.norm_squared())
    }

    /// Dense n×d reconstruction; test and diagnostic use.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        if self.sigma.is_empty() {
            return DMatrix::zeros(self.rows, self.dim());
        }
        &self.u * DMatrix::from_diagonal(&self.sigma) * &self.v_t
    }
}

/// Appends `extra` zero rows below `m`.
fn pad_bottom(m: &DMatrix<f64>, extra: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows() + extra, m.ncols());
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// The block matrix [[M, 0], [0, 1]].
fn pad_bottom_unit(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows() + 1, m.ncols() + 1);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out[(m.nrows(), m.ncols())] = 1.0;
    out
}

/// Acceptance threshold for the QR-iteration factorization of a core.
/// Honest results sit near machine precision; the failure mode is off by
/// many orders of magnitude, so the gap is unambiguous.
const CORE_SVD_CHECK_REL: f64 = 1e-10;

/// SVD of a small core matrix, checked by multiplying the factors back.
///
/// The bidiagonal QR iteration can silently mis-factor cores that mix
/// exactly tied singular values with entries hundreds of orders below the
/// matrix scale (integer streams build exactly such cores once two axis
/// masses cross): both factors come back orthogonal, yet their product
/// misses the input by an O(1) amount. When the product check fails, the
/// job is redone with plain Jacobi rotations rather than patched up.
fn core_svd(core: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = core.clone().svd(true, true);
    let f = svd.u.expect("core SVD factors requested");
    let g_rows = svd.v_t.expect("core SVD factors requested");
    let resid = (&f * DMatrix::from_diagonal(&svd.singular_values) * &g_rows - &core).norm();
    if resid <= CORE_SVD_CHECK_REL * core.norm() {
        return (f, svd.singular_values, g_rows);
    }
    jacobi_svd(&core)
}

/// One-sided Jacobi SVD: rotates column pairs until all are mutually
/// orthogonal, then reads the factors off the column norms. Slower than the
/// QR iteration but stable on tied spectra. Factors are sorted descending.
fn jacobi_svd(k: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (m, n) = (k.nrows(), k.ncols());
    if n > m {
        // Factor the transpose so at most m columns need orthogonalizing.
        let (f, sigma, g_rows) = jacobi_svd(&k.transpose());
        return (g_rows.transpose(), sigma, f.transpose());
    }
    let mut b = k.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    // Quadratic convergence makes the sweep cap generous; each sweep leaves
    // the represented product K·V = B intact, so stopping early is safe.
    for _ in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let aii = b.column(i).norm_squared();
                let ajj = b.column(j).norm_squared();
                let aij = b.column(i).dot(&b.column(j));
                if aij.abs() <= f64::EPSILON * (aii * ajj).sqrt() {
                    continue;
                }
                let tau = (ajj - aii) / (2.0 * aij);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_column_pair(&mut b, i, j, c, s);
                rotate_column_pair(&mut v, i, j, c, s);
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| b.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| norms[c].total_cmp(&norms[a]));
    let mut f = DMatrix::zeros(m, n);
    let mut sigma = DVector::zeros(n);
    let mut g_rows = DMatrix::zeros(n, n);
    for (l, &j) in order.iter().enumerate() {
        sigma[l] = norms[j];
        g_rows.row_mut(l).copy_from(&v.column(j).transpose());
        if norms[j] > 0.0 {
            f.column_mut(l).copy_from(&(b.column(j) / norms[j]));
        } else {
            fill_orthonormal_column(&mut f, l);
        }
    }
    (f, sigma, g_rows)
}

/// In-place rotation of columns `i` and `j` by [[c, s], [-s, c]].
fn rotate_column_pair(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * x - s * y;
        m[(r, j)] = s * x + c * y;
    }
}

/// Fills column `l` with a unit vector orthogonal to columns `0..l`.
/// Exists for zero singular values, whose left vector is arbitrary.
fn fill_orthonormal_column(f: &mut DMatrix<f64>, l: usize) {
    let m = f.nrows();
    for axis in 0..m {
        let mut cand = DVector::zeros(m);
        cand[axis] = 1.0;
        for c in 0..l {
            let proj = f.column(c).dot(&cand);
            cand -= f.column(c) * proj;
        }
        let norm = cand.norm();
        // l < m, so some axis always survives the projection.
        if norm > 0.5 {
            f.column_mut(l).copy_from(&(cand / norm));
            return;
        }
    }
}

/// Modified Gram-Schmidt on columns. Intended for near-orthonormal input
/// (diagonal of R close to 1), where it is numerically safe.
fn gram_schmidt_columns(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, r) = (a.nrows(), a.ncols());
    let mut q = a.clone();
    let mut rr = DMatrix::zeros(r, r);
    for j in 0..r {
        for i in 0..j {
            let qi = q.column(i).into_owned();
            let rij = qi.dot(&q.column(j).into_owned());
            rr[(i, j)] = rij;
            let update = q.column(j) - &qi * rij;
            q.column_mut(j).copy_from(&update);
        }
        let norm = q.column(j).norm();
        rr[(j, j)] = norm;
        if norm > 0.0 {
            q.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    debug_assert_eq!(q.nrows(), n);
    (q, rr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn append_all(state: SvdState, rows: &DMatrix<f64>) -> SvdState {
        let mut s = state;
        for i in 0..rows.nrows() {
            s = s.append_row(&rows.row(i).transpose()).unwrap();
        }
        s
    }

    fn random_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn first_row_is_its_own_svd() {
        let a = DVector::from_vec(vec![3.0, 4.0]);
        let s = SvdState::new(2).append_row(&a).unwrap();
        assert_eq!(s.rows(), 1);
        assert_eq!(s.rank(), 1);
        assert!((s.singular_values()[0] - 5.0).abs() < 1e-12);
        let v = s.right_vectors().row(0);
        assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_second_row_gives_identity_spectrum() {
        let s = SvdState::new(2)
            .append_row(&DVector::from_vec(vec![1.0, 0.0]))
            .unwrap()
            .append_row(&DVector::from_vec(vec![0.0, 1.0]))
            .unwrap();
        let sv = s.singular_values();
        assert!((sv[0] - 1.0).abs() < 1e-12 && (sv[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rows_only_pad() {
        let s = SvdState::new(3)
            .append_row(&DVector::zeros(3))
            .unwrap()
            .append_row(&DVector::from_vec(vec![0.0, 2.0, 0.0]))
            .unwrap()
            .append_row(&DVector::zeros(3))
            .unwrap();
        assert_eq!(s.rows(), 3);
        assert_eq!(s.rank(), 1);
        assert!((s.frob_sq() - 4.0).abs() < 1e-12);
        let recon = s.reconstruct();
        assert!((recon[(1, 1)] - 2.0).abs() < 1e-12);
        assert!(recon.row(0).norm() < 1e-12 && recon.row(2).norm() < 1e-12);
    }

    #[test]
    fn incremental_matches_one_shot_svd() {
        let a = random_matrix(20, 10, 7);
        let s = append_all(SvdState::new(10), &a);
        let oracle = a.clone().svd(false, false).singular_values;
        for (i, sv) in oracle.iter().enumerate() {
            assert!(
                (s.singular_values()[i] - sv).abs() <= 1e-8 * (1.0 + sv),
                "σ_{i} mismatch: {} vs {}",
                s.singular_values()[i],
                sv
            );
        }
    }

    #[test]
    fn appending_never_decreases_singular_values() {
        let a = random_matrix(15, 6, 11);
        let mut s = SvdState::new(6);
        let mut prev: Vec<f64> = Vec::new();
        for i in 0..a.nrows() {
            s = s.append_row(&a.row(i).transpose()).unwrap();
            let cur = s.singular_values().to_vec();
            for (j, p) in prev.iter().enumerate() {
                assert!(cur[j] >= p - 1e-9, "σ_{j} decreased: {} -> {}", p, cur[j]);
            }
            prev = cur;
        }
    }

    #[test]
    fn reconstruction_stays_tight_across_reorth() {
        // 200 updates crosses the re-orthonormalization period three times.
        let a = random_matrix(200, 8, 23);
        let s = append_all(SvdState::new(8), &a);
        let err = (&a - s.reconstruct()).norm();
        assert!(err <= 1e-7 * a.norm(), "reconstruction error {err}");
        // U must remain column-orthonormal.
        let gram = s.left_vectors().transpose() * s.left_vectors();
        let eye = DMatrix::identity(gram.nrows(), gram.ncols());
        assert!((gram - eye).norm() < 1e-9);
    }

    #[test]
    fn duplicate_rows_stay_in_span() {
        let row = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let mut s = SvdState::new(3).append_row(&row).unwrap();
        for _ in 0..5 {
            s = s.append_row(&row).unwrap();
        }
        assert_eq!(s.rank(), 1);
        assert!((s.singular_values()[0] - row.norm() * 6f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn tail_cost_and_band_agree_with_spectrum() {
        let a = random_matrix(12, 5, 31);
        let s = append_all(SvdState::new(5), &a);
        let opt2 = crate::subspace::opt_cost(&a, 2).unwrap();
        assert!((s.tail_cost(2) - opt2).abs() < 1e-8 * (1.0 + opt2));
    }

    #[test]
    fn cost_against_matches_dense_residual() {
        let a = random_matrix(14, 6, 41);
        let s = append_all(SvdState::new(6), &a);
        let basis = s.top_basis(2);
        let dense = crate::subspace::lra_cost(&a, &basis).unwrap();
        let compact = s.cost_against(&basis).unwrap();
        assert!((dense - compact).abs() < 1e-8 * (1.0 + dense));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = SvdState::new(3);
        let bad = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            s.append_row(&bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_core_factorization_is_repaired() {
        // Frozen from a live failure: entries spanning fifteen orders of
        // magnitude next to an exactly tied pair. The plain QR iteration
        // returns orthogonal factors whose product misses this input by
        // 2e-1, which used to freeze an O(1) error into the state.
        let mut k = DMatrix::zeros(5, 4);
        k[(0, 0)] = 9.486832980505321;
        k[(1, 1)] = 9.48683298050532;
        k[(2, 2)] = 6.92820323027559;
        k[(3, 3)] = 6.8556546004010945;
        k[(4, 0)] = 2.7755575615439976e-16;
        k[(4, 1)] = -6.5503158452884236e-15;
        k[(4, 2)] = 3.1636847851503134e-29;
        k[(4, 3)] = 1.000000000000002;
        let (f, sigma, g_rows) = core_svd(k.clone());
        let resid = (&f * DMatrix::from_diagonal(&sigma) * &g_rows - &k).norm();
        assert!(resid <= 1e-12 * k.norm(), "core product residual {resid}");
        let sq: Vec<f64> = sigma.iter().map(|s| s * s).collect();
        for (got, want) in sq.iter().zip([90.0, 90.0, 48.0, 48.0]) {
            assert!((got - want).abs() < 1e-9, "sigma_sq {sq:?}");
        }
    }

    #[test]
    fn tied_integer_axes_keep_the_factorization_exact() {
        // Two axis pairs whose accumulated masses tie and then cross; the
        // four-way tie at the crossing is where the QR iteration breaks.
        let mut schedule = Vec::new();
        for _ in 0..90 {
            schedule.extend([2usize, 3]);
        }
        for _ in 0..120 {
            schedule.extend([0usize, 1]);
        }
        let mut s = SvdState::new(4);
        let mut mat = DMatrix::<f64>::zeros(0, 4);
        for &j in &schedule {
            let mut e = DVector::zeros(4);
            e[j] = 1.0;
            s = s.append_row(&e).unwrap();
            let nr = mat.nrows();
            mat = mat.insert_row(nr, 0.0);
            mat[(nr, j)] = 1.0;
        }
        let err = (&mat - s.reconstruct()).norm();
        assert!(err <= 1e-7 * mat.norm(), "reconstruction error {err}");
        let sq: Vec<f64> = s.singular_values().iter().map(|x| x * x).collect();
        for (got, want) in sq.iter().zip([120.0, 120.0, 90.0, 90.0]) {
            assert!((got - want).abs() < 1e-6, "sigma_sq {sq:?}");
        }
    }

    #[test]
    fn jacobi_fallback_handles_rank_deficiency_and_wide_cores() {
        // Duplicate columns force a zero singular value; the wide case runs
        // through the transpose path.
        let tall = DMatrix::from_row_slice(4, 3, &[
            1.0, 2.0, 1.0, //
            0.5, -1.0, 0.5, //
            2.0, 0.0, 2.0, //
            -1.0, 1.0, -1.0,
        ]);
        for k in [tall.clone(), tall.transpose()] {
            let (f, sigma, g_rows) = jacobi_svd(&k);
            let resid = (&f * DMatrix::from_diagonal(&sigma) * &g_rows - &k).norm();
            assert!(resid <= 1e-12 * k.norm(), "jacobi residual {resid}");
            let p = sigma.len();
            let ff = f.transpose() * &f;
            assert!((ff - DMatrix::identity(p, p)).norm() < 1e-12);
            let gg = &g_rows * g_rows.transpose();
            assert!((gg - DMatrix::identity(p, p)).norm() < 1e-12);
            assert!(sigma[p - 1].abs() < 1e-12, "smallest σ should vanish");
            for w in sigma.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }
}
