//! Projection and shrinkage operators of the design matrix.
//!
//! Everything flows through one thin SVD `X = U diag(s) V^T`. With
//! `tau_i = s_i^2 / n` the eigenvalues of `X^T X / n`:
//!
//! * `P_X = U U^T`, `Q_X = I - P_X`;
//! * `P_mu = X (X^T X + n mu I)^{-1} X^T = U diag(tau / (tau + mu)) U^T`;
//! * `Q_mu^{1/2} = I - U diag(1 - sqrt(mu / (tau + mu))) U^T`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, Error, Result};

/// Thin SVD of a design matrix, truncated at its numerical rank.
#[derive(Debug, Clone)]
pub struct DesignFactor {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
    v: DMatrix<f64>,
    n: usize,
    d: usize,
    xtx_eigs: Vec<f64>,
}

/// Factorizes `x` (n x d). Columns whose singular value falls below
/// `1e-12 * s_1 * max(n, d)` are dropped, so rank-deficient designs are fine.
pub fn factor_design(x: &DMatrix<f64>) -> Result<DesignFactor> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!("design must be non-empty, got {n}x{d}")));
    }
    check_finite(x.as_slice(), "design matrix")?;

    let svd = x.clone().svd(true, true);
    let u_full = svd.u.expect("requested U");
    let vt_full = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let s_max = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let threshold = 1e-12 * s_max * n.max(d) as f64;
    let kept: Vec<usize> = order.into_iter().filter(|&i| s_max > 0.0 && svd.singular_values[i] > threshold).collect();
    let r = kept.len();

    let u = DMatrix::from_fn(n, r, |i, j| u_full[(i, kept[j])]);
    let v = DMatrix::from_fn(d, r, |i, j| vt_full[(kept[j], i)]);
    let singular_values: Vec<f64> = kept.iter().map(|&i| svd.singular_values[i]).collect();
    let mut xtx_eigs: Vec<f64> = singular_values.iter().map(|s| s * s / n as f64).collect();
    xtx_eigs.resize(d, 0.0);

    Ok(DesignFactor { u, singular_values, v, n, d, xtx_eigs })
}

impl DesignFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn left_singular_vectors(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn right_singular_vectors(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Eigenvalues of `X^T X / n`, non-increasing, zero-padded to length `d`.
    pub fn xtx_eigs(&self) -> &[f64] {
        &self.xtx_eigs
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        Ok(())
    }

    fn check_mu(mu: f64) -> Result<()> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive (use the Q_X projection for mu = 0), got {mu}"
            )));
        }
        Ok(())
    }

    /// `v - U diag(w) U^T v`.
    fn shrink(&self, weights: impl Iterator<Item = f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut coords = self.u.tr_mul(v);
        for (c, w) in coords.iter_mut().zip(weights) {
            *c *= w;
        }
        v - &self.u * coords
    }

    pub fn apply_p_x(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v)?;
        Ok(&self.u * self.u.tr_mul(v))
    }

    /// Residual of `v` after projecting onto the column space of `X`.
    pub fn apply_q_x(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v)?;
        Ok(self.shrink(std::iter::repeat(1.0), v))
    }

    /// `Q_mu v`, or `Q_mu^{1/2} v` when `half` is set.
    pub fn apply_q_mu(&self, mu: f64, v: &DVector<f64>, half: bool) -> Result<DVector<f64>> {
        Self::check_mu(mu)?;
        self.check_len(v)?;
        Ok(self.shrink(self.q_mu_weights(mu, half).into_iter(), v))
    }

    /// `P_mu v = X (X^T X + n mu I)^{-1} X^T v`.
    pub fn apply_p_mu(&self, mu: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        Self::check_mu(mu)?;
        self.check_len(v)?;
        let mut coords = self.u.tr_mul(v);
        for (c, tau) in coords.iter_mut().zip(&self.xtx_eigs) {
            *c *= tau / (tau + mu);
        }
        Ok(&self.u * coords)
    }

    /// Weights `w_i` with `Q_mu^{(1/2)} = I - U diag(w) U^T`.
    pub(crate) fn q_mu_weights(&self, mu: f64, half: bool) -> Vec<f64> {
        self.xtx_eigs[..self.rank()]
            .iter()
            .map(|&tau| if half { 1.0 - (mu / (tau + mu)).sqrt() } else { tau / (tau + mu) })
            .collect()
    }

    /// Minimum-norm least-squares coefficients `X^+ y`.
    pub fn ols_coefficients(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(y)?;
        let mut coords = self.u.tr_mul(y);
        for (c, s) in coords.iter_mut().zip(&self.singular_values) {
            *c /= s;
        }
        Ok(&self.v * coords)
    }

    /// Ridge coefficients `(X^T X + n mu I)^{-1} X^T y`.
    pub fn ridge_coefficients(&self, mu: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        Self::check_mu(mu)?;
        self.check_len(y)?;
        let n = self.n as f64;
        let mut coords = self.u.tr_mul(y);
        for (c, s) in coords.iter_mut().zip(&self.singular_values) {
            *c *= s / (s * s + n * mu);
        }
        Ok(&self.v * coords)
    }

    /// Dense `Q_X`.
    pub fn q_x_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) - &self.u * self.u.transpose()
    }

    /// Dense `Q_mu` or `Q_mu^{1/2}`.
    pub fn q_mu_matrix(&self, mu: f64, half: bool) -> Result<DMatrix<f64>> {
        Self::check_mu(mu)?;
        let w = DMatrix::from_diagonal(&DVector::from_vec(self.q_mu_weights(mu, half)));
        Ok(DMatrix::identity(self.n, self.n) - &self.u * w * self.u.transpose())
    }

    /// `(I - U D U^T) M` column by column, in `O(n m r)`.
    pub(crate) fn shrink_columns(&self, weights: &[f64], m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coords = self.u.tr_mul(m);
        for (mut row, w) in coords.row_iter_mut().zip(weights) {
            row *= *w;
        }
        m - &self.u * coords
    }

    /// `(I - U D U^T) A (I - U D U^T)` for symmetric `A`, in `O(n^2 r)`.
    /// The result is symmetrized.
    pub(crate) fn sandwich(&self, a: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
        let au = a * &self.u; // n x r
        let utau = self.u.tr_mul(&au); // r x r
        let dm = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
        let aud = &au * &dm;
        let mid = &dm * utau * &dm;
        let mut out = a - &self.u * aud.transpose() - &aud * self.u.transpose() + &self.u * mid * self.u.transpose();
        symmetrize(&mut out);
        out
    }

    /// `Q_X A Q_X`.
    pub fn project_both_sides(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        self.sandwich(a, &vec![1.0; self.rank()])
    }
}

pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

pub(crate) fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(a: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
    }
    let scale = a.amax().max(1.0);
    let asym = max_asymmetry(a);
    if asym > tol * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Solves `(A + ridge I) x = b` by Cholesky for symmetric PSD `A`.
pub fn solve_spd(a: &DMatrix<f64>, ridge: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
    if !(ridge.is_finite() && ridge > 0.0) {
        return Err(Error::InvalidParameter(format!("ridge must be positive, got {ridge}")));
    }
    check_symmetric(a, 1e-10)?;
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
    }
    let mut shifted = a.clone();
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += ridge;
    }
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::Factorization("Cholesky failed: matrix plus ridge is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Symmetric eigendecomposition with eigenvalues sorted non-increasing.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one column per entry of `values`.
    pub vectors: DMatrix<f64>,
}

/// Eigendecomposition of a symmetric matrix (lower triangle is read).
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    check_symmetric(a, 1e-10)?;
    check_finite(a.as_slice(), "symmetric matrix")?;
    let n = a.nrows();
    // Entries this far below the largest one cannot affect the result, and
    // the subnormal numbers they produce mid-reduction can poison it with NaN.
    let floor = a.amax() * 1e-150;
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| {
        let v = a[(i, j)];
        if v.abs() < floor {
            0.0
        } else {
            v
        }
    });
    let eig = fm.selfadjoint_eigendecomposition(faer::Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s.read(y).total_cmp(&s.read(x)));
    let values: Vec<f64> = order.iter().map(|&i| s.read(i)).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| u.read(i, order[j]));
    if values.iter().chain(vectors.iter()).all(|v| v.is_finite()) {
        return Ok(SymmetricEigen { values, vectors });
    }
    let fallback = nalgebra::SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| fallback.eigenvalues[y].total_cmp(&fallback.eigenvalues[x]));
    let values: Vec<f64> = order.iter().map(|&i| fallback.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| fallback.eigenvectors[(i, order[j])]);
    check_finite(&values, "eigenvalues")?;
    Ok(SymmetricEigen { values, vectors })
}
