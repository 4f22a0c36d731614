//! Kernel functions and the `1/n`-scaled kernel matrix.
//!
//! Two kernels are supported: the Gaussian kernel `exp(-||x - y||^2 / gamma)`
//! and the 1-periodic spline kernel of order `q`,
//!
//! ```text
//! K(x, y) = 1 + 2 * sum_{k=1}^{M} cos(2 pi k (x - y)) * k^(-2q)
//! ```
//!
//! which is the real form of the two-sided complex-exponential series,
//! truncated after `M` terms. [`spline_truncation_error`] bounds the
//! discarded tail.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{check_finite, Error, Result};

/// Series cutoff used when a spline kernel is written without `M=`.
pub const DEFAULT_SPLINE_TRUNCATION: usize = 200;

/// A serializable description of a kernel function.
///
/// The textual form is `gaussian:gamma=<float>` or `spline:q=<float>,M=<int>`
/// and round-trips exactly through [`fmt::Display`] / [`FromStr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Gaussian { gamma: f64 },
    PeriodicSpline { q: f64, truncation: usize },
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn spline(q: f64, truncation: usize) -> Result<Self> {
        let spec = KernelSpec::PeriodicSpline { q, truncation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { gamma } => {
                if !(gamma.is_finite() && gamma > 0.0) {
                    return Err(Error::InvalidKernel(format!("gaussian bandwidth must be positive, got {gamma}")));
                }
            }
            KernelSpec::PeriodicSpline { q, truncation } => {
                if !(q.is_finite() && q > 0.5) {
                    return Err(Error::InvalidKernel(format!("spline order must exceed 1/2, got {q}")));
                }
                if truncation == 0 {
                    return Err(Error::InvalidKernel("spline truncation must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Gaussian bandwidth or spline order, whichever applies.
    pub fn shape_parameter(&self) -> f64 {
        match *self {
            KernelSpec::Gaussian { gamma } => gamma,
            KernelSpec::PeriodicSpline { q, .. } => q,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, KernelSpec::Gaussian { .. })
    }

    fn evaluator(&self) -> Evaluator {
        match *self {
            KernelSpec::Gaussian { gamma } => Evaluator::Gaussian { gamma },
            KernelSpec::PeriodicSpline { q, truncation } => {
                Evaluator::Spline { weights: (1..=truncation).map(|k| (k as f64).powf(-2.0 * q)).collect() }
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelSpec::Gaussian { gamma } => write!(f, "gaussian:gamma={gamma}"),
            KernelSpec::PeriodicSpline { q, truncation } => {
                write!(f, "spline:q={q},M={truncation}")
            }
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidKernel(format!("`{s}`: {msg}"));
        let (kind, params) = s.trim().split_once(':').ok_or_else(|| bad("missing `:`"))?;
        let mut gamma = None;
        let mut q = None;
        let mut truncation = None;
        for part in params.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "gamma" => gamma = Some(value.parse::<f64>().map_err(|_| bad("bad gamma"))?),
                "q" => q = Some(value.parse::<f64>().map_err(|_| bad("bad q"))?),
                "M" => truncation = Some(value.parse::<usize>().map_err(|_| bad("bad M"))?),
                _ => return Err(bad(&format!("unknown parameter `{key}`"))),
            }
        }
        match kind.trim() {
            "gaussian" => {
                if q.is_some() || truncation.is_some() {
                    return Err(bad("gaussian takes only gamma"));
                }
                KernelSpec::gaussian(gamma.ok_or_else(|| bad("missing gamma"))?)
            }
            "spline" => {
                if gamma.is_some() {
                    return Err(bad("spline takes q and M"));
                }
                KernelSpec::spline(q.ok_or_else(|| bad("missing q"))?, truncation.unwrap_or(DEFAULT_SPLINE_TRUNCATION))
            }
            other => Err(bad(&format!("unknown kernel kind `{other}`"))),
        }
    }
}

enum Evaluator {
    Gaussian { gamma: f64 },
    Spline { weights: Vec<f64> },
}

impl Evaluator {
    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Evaluator::Gaussian { gamma } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / gamma).exp()
            }
            Evaluator::Spline { weights } => spline_series(weights, (x[0] - y[0]).abs()),
        }
    }
}

/// `1 + 2 sum_k w_k cos(2 pi k t)` by Clenshaw recurrence.
///
/// `distance` is `|x - y|`; reducing it to `[0, 1/2]` keeps the result
/// bitwise symmetric in its arguments.
fn spline_series(weights: &[f64], distance: f64) -> f64 {
    let mut t = distance.rem_euclid(1.0);
    if t > 0.5 {
        t = 1.0 - t;
    }
    let c = (2.0 * std::f64::consts::PI * t).cos();
    let (mut b1, mut b2) = (0.0, 0.0);
    for &w in weights.iter().rev() {
        let b0 = w + 2.0 * c * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    1.0 + 2.0 * (b1 * c - b2)
}

fn check_dims(spec: &KernelSpec, dx: usize, dy: usize) -> Result<()> {
    if dx != dy {
        return Err(Error::DimensionMismatch { expected: dx, got: dy });
    }
    if matches!(spec, KernelSpec::PeriodicSpline { .. }) && dx != 1 {
        return Err(Error::InvalidKernel(format!("the periodic spline kernel is univariate, got dimension {dx}")));
    }
    Ok(())
}

/// Evaluates `K(x, y)`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_dims(spec, x.len(), y.len())?;
    check_finite(x, "kernel argument")?;
    check_finite(y, "kernel argument")?;
    Ok(spec.evaluator().eval(x, y))
}

pub(crate) fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

/// Unscaled Gram matrix `K(X_i, X_j)`; each unordered pair is evaluated once.
pub fn gram_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_dims(spec, x.ncols(), x.ncols())?;
    check_finite(x.as_slice(), "design matrix")?;
    let rows = rows_of(x);
    let eval = spec.evaluator();
    let n = rows.len();
    let mut gram = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let value = eval.eval(&rows[i], &rows[j]);
            gram[(i, j)] = value;
            gram[(j, i)] = value;
        }
    }
    Ok(gram)
}

/// Unscaled cross-kernel matrix with entries `K(A_i, B_j)`.
pub fn cross_kernel(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_dims(spec, a.ncols(), b.ncols())?;
    check_finite(a.as_slice(), "kernel argument")?;
    check_finite(b.as_slice(), "kernel argument")?;
    let rows_a = rows_of(a);
    let rows_b = rows_of(b);
    let eval = spec.evaluator();
    Ok(DMatrix::from_fn(rows_a.len(), rows_b.len(), |i, j| eval.eval(&rows_a[i], &rows_b[j])))
}

/// The kernel matrix with entries `K(X_i, X_j) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
}

impl KernelMatrix {
    /// Scales an unscaled symmetric Gram matrix by `1/n`.
    pub fn from_gram(mut gram: DMatrix<f64>) -> Self {
        let scale = 1.0 / gram.nrows() as f64;
        gram *= scale;
        KernelMatrix { entries: gram }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// The per-entry scale `1/n`.
    pub fn scale(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }
}

/// Builds the kernel matrix `K(X_i, X_j) / n` for the rows of `x`.
pub fn kernel_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<KernelMatrix> {
    if x.nrows() == 0 {
        return Err(Error::InvalidParameter("kernel matrix needs at least one row".into()));
    }
    Ok(KernelMatrix::from_gram(gram_matrix(spec, x)?))
}

/// Upper bound `2 M^(1-2q) / (2q - 1)` on the discarded spline tail
/// `2 sum_{k > M} k^(-2q)`; bounds `|K_M(x, y) - K_inf(x, y)|` uniformly.
pub fn spline_truncation_error(q: f64, truncation: usize) -> Result<f64> {
    if !(q.is_finite() && q > 0.5) {
        return Err(Error::InvalidParameter(format!("spline order must exceed 1/2, got {q}")));
    }
    if truncation == 0 {
        return Err(Error::InvalidParameter("truncation must be at least 1".into()));
    }
    let m = truncation as f64;
    Ok(2.0 * m.powf(1.0 - 2.0 * q) / (2.0 * q - 1.0))
}
