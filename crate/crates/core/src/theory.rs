//! Spectral quantities behind the risk bounds, the bounds themselves, and
//! numerical checks of the comparison inequalities between estimators.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::design::{factor_design, solve_spd, symmetric_eigen, DesignFactor};
use crate::error::{Error, Result};

/// Where a spectrum came from. Bound assembly checks these tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumSource {
    /// Eigenvalues of the scaled kernel matrix `K`.
    EmpiricalK,
    /// Eigenvalues of `Q_X K Q_X`.
    EmpiricalQkq,
    /// Eigenvalues of `Q_mu K Q_mu`.
    EmpiricalQmuKQmu,
    /// Eigenvalues of `X^T X / n`.
    EmpiricalSigma,
    /// A population sequence given in closed form.
    Analytic,
}

impl SpectrumSource {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumSource::EmpiricalK => "empirical_K",
            SpectrumSource::EmpiricalQkq => "empirical_QKQ",
            SpectrumSource::EmpiricalQmuKQmu => "empirical_QmuKQmu",
            SpectrumSource::EmpiricalSigma => "empirical_sigma",
            SpectrumSource::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    /// Non-increasing, nonnegative.
    pub values: Vec<f64>,
    pub source: SpectrumSource,
    /// Sample size used by the kernel complexity `R`.
    pub n_context: usize,
    /// Upper bound on the sum of eigenvalues dropped by truncation.
    pub tail_bound: f64,
}

impl EigenSpectrum {
    /// Wraps explicit values; they are sorted and must be finite and nonnegative.
    pub fn from_values(mut values: Vec<f64>, source: SpectrumSource, n_context: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("spectrum values must be finite and nonnegative".into()));
        }
        if n_context == 0 {
            return Err(Error::InvalidParameter("spectrum sample size must be positive".into()));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(EigenSpectrum { values, source, n_context, tail_bound: 0.0 })
    }

    pub fn with_n_context(mut self, n: usize) -> Self {
        self.n_context = n;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Eigenvalues of a symmetric PSD matrix. Values down to `-1e-8 * trace`
/// are treated as rounding and clamped to zero.
pub fn spectrum(matrix: &DMatrix<f64>, source: SpectrumSource) -> Result<EigenSpectrum> {
    let eig = symmetric_eigen(matrix)?;
    let tolerance = 1e-8 * matrix.trace().abs();
    let mut values = eig.values;
    if let Some(&lowest) = values.last() {
        if lowest < -tolerance {
            return Err(Error::Indefinite { value: lowest, tolerance });
        }
    }
    for v in &mut values {
        *v = v.max(0.0);
    }
    EigenSpectrum::from_values(values, source, matrix.nrows().max(1))
}

/// `sum_i (e_i / (e_i + lambda))^2`.
pub fn variance_trace(spec: &EigenSpectrum, lambda: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    Ok(spec.values.iter().map(|e| (e / (e + lambda)).powi(2)).sum())
}

/// `R(lambda) = sqrt((1/n) sum_j min(lambda, e_j))` with `n` the spectrum's sample size.
pub fn kernel_complexity(spec: &EigenSpectrum, lambda: f64) -> Result<f64> {
    if spec.is_empty() {
        return Err(Error::InvalidParameter("empty spectrum".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok(complexity_unchecked(spec, lambda))
}

fn complexity_unchecked(spec: &EigenSpectrum, lambda: f64) -> f64 {
    let s: f64 = spec.values.iter().map(|&e| e.min(lambda)).sum();
    (s / spec.n_context as f64).sqrt()
}

/// The positive fixed point of `R(delta) = delta`, by bisection.
pub fn critical_radius(spec: &EigenSpectrum) -> Result<f64> {
    let top = spec.largest();
    if !(top > 0.0) {
        return Err(Error::InvalidParameter("critical radius needs a positive eigenvalue".into()));
    }
    let r = |x: f64| complexity_unchecked(spec, x);
    let (mut lo, mut hi) = (1e-300, r(top) + top + 1.0);
    for _ in 0..200 {
        // Geometric midpoints while the bracket spans orders of magnitude.
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let gap = mid - r(mid);
        if gap.abs() <= 1e-12 * mid.max(1.0) && hi / lo <= 4.0 {
            return Ok(mid);
        }
        if gap > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Number of eigenvalues at least `delta`.
pub fn statistical_dimension(spec: &EigenSpectrum, delta: f64) -> Result<usize> {
    check_positive("delta", delta)?;
    Ok(spec.values.iter().filter(|&&e| e >= delta).count())
}

/// Population eigenvalue decay profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticDecay {
    /// `j^(-2 beta)`, `beta > 1/2`.
    Polynomial { beta: f64 },
    /// `exp(-rate j)`, `rate > 0`.
    Exponential { rate: f64 },
}

impl fmt::Display for AnalyticDecay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticDecay::Polynomial { beta } => write!(f, "polynomial:beta={beta}"),
            AnalyticDecay::Exponential { rate } => write!(f, "exponential:rate={rate}"),
        }
    }
}

impl FromStr for AnalyticDecay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("expected `polynomial:beta=<f>` or `exponential:rate=<f>`, got `{s}`"));
        let (name, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let (key, value) = rest.split_once('=').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        match (name.trim(), key.trim()) {
            ("polynomial", "beta") => Ok(AnalyticDecay::Polynomial { beta: value }),
            ("exponential", "rate" | "gamma") => Ok(AnalyticDecay::Exponential { rate: value }),
            _ => Err(bad()),
        }
    }
}

/// The first `length` terms of a decay profile, with the dropped tail bounded.
pub fn analytic_spectrum(decay: AnalyticDecay, length: usize) -> Result<EigenSpectrum> {
    if length == 0 {
        return Err(Error::InvalidParameter("spectrum length must be positive".into()));
    }
    let (values, tail_bound): (Vec<f64>, f64) = match decay {
        AnalyticDecay::Polynomial { beta } => {
            if !(beta.is_finite() && beta > 0.5) {
                return Err(Error::InvalidParameter(format!("polynomial decay needs beta > 1/2, got {beta}")));
            }
            let p = 2.0 * beta;
            let values = (1..=length).map(|j| 1.0 / (j as f64).powf(p)).collect();
            (values, (length as f64).powf(1.0 - p) / (p - 1.0))
        }
        AnalyticDecay::Exponential { rate } => {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::InvalidParameter(format!("exponential decay needs rate > 0, got {rate}")));
            }
            let values = (1..=length).map(|j| (-rate * j as f64).exp()).collect();
            (values, (-rate * (length + 1) as f64).exp() / (-(-rate).exp_m1()))
        }
    };
    Ok(EigenSpectrum { values, source: SpectrumSource::Analytic, n_context: 1, tail_bound })
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// Fixed-design oracle inequality for KRR.
    T1,
    /// Fixed-design oracle inequality for the additive estimator.
    T2,
    /// Random-design bound for the additive estimator via `R(lambda)`.
    T3,
    /// Fixed-design bound for the ridge variant.
    T4,
    /// Random-design bound for the ridge variant.
    T5,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [Theorem::T1, Theorem::T2, Theorem::T3, Theorem::T4, Theorem::T5];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::T1 => "T1",
            Theorem::T2 => "T2",
            Theorem::T3 => "T3",
            Theorem::T4 => "T4",
            Theorem::T5 => "T5",
        }
    }

    fn uses_mu(self) -> bool {
        matches!(self, Theorem::T4 | Theorem::T5)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        Theorem::ALL
            .into_iter()
            .find(|th| th.name() == t)
            .ok_or_else(|| Error::Parse(format!("unknown theorem `{s}` (expected T1..T5)")))
    }
}

/// A hand-picked point inside the infimum of a bound: a linear part `alpha`
/// and a function `f` in the RKHS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCandidate {
    /// Prediction risk of the candidate, `R(<alpha, .> + f - f*)`.
    pub approx_error: f64,
    pub alpha_norm_sq: f64,
    /// `||f||_K^2`.
    pub rkhs_norm_sq: f64,
}

/// How the bias part of a bound is obtained.
#[derive(Debug, Clone)]
pub enum BiasInput {
    /// Known regression function on the design points. The exact
    /// regularization bias of the fixed-design estimator replaces the infimum.
    Exact {
        f_star: DVector<f64>,
        /// Scaled kernel matrix at the design points.
        kernel_matrix: DMatrix<f64>,
        /// Design matrix; required by every theorem except T1.
        x: Option<DMatrix<f64>>,
    },
    Candidate(OracleCandidate),
    /// Only allowed when `f* = 0` is known; the bias then vanishes for T1.
    Zero,
}

#[derive(Debug, Clone)]
pub struct BoundRequest<'a> {
    pub theorem: Theorem,
    pub lambda: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub d: usize,
    pub n: usize,
    pub kernel_spectrum: &'a EigenSpectrum,
    /// Eigenvalues of the (empirical or population) covariance; T4 and T5.
    pub linear_spectrum: Option<&'a EigenSpectrum>,
    pub bias: BiasInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub lambda: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub bias: f64,
    pub approx: f64,
    pub var_linear: f64,
    pub var_kernel: f64,
    pub total: f64,
    pub kernel_source: SpectrumSource,
    pub linear_source: Option<SpectrumSource>,
}

pub const BOUND_CSV_HEADER: [&str; 9] =
    ["theorem", "lambda", "mu", "sigma2", "bias", "approx", "var_linear", "var_kernel", "total"];

impl BoundReport {
    pub fn csv_record(&self) -> [String; 9] {
        [
            self.theorem.to_string(),
            format!("{:e}", self.lambda),
            format!("{:e}", self.mu),
            format!("{:e}", self.sigma2),
            format!("{:e}", self.bias),
            format!("{:e}", self.approx),
            format!("{:e}", self.var_linear),
            format!("{:e}", self.var_kernel),
            format!("{:e}", self.total),
        ]
    }

    pub fn write_csv<W: Write>(reports: &[BoundReport], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(BOUND_CSV_HEADER)?;
        for r in reports {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }
}

fn require_source(what: &str, spec: &EigenSpectrum, allowed: &[SpectrumSource]) -> Result<()> {
    if allowed.contains(&spec.source) {
        Ok(())
    } else {
        let names: Vec<&str> = allowed.iter().map(|s| s.name()).collect();
        Err(Error::Incompatible(format!(
            "{what} spectrum has source {}, expected one of {}",
            spec.source.name(),
            names.join(", ")
        )))
    }
}

/// Assembles the right-hand side of a risk bound.
pub fn bound_report(req: &BoundRequest<'_>) -> Result<BoundReport> {
    check_positive("lambda", req.lambda)?;
    if !(req.sigma2.is_finite() && req.sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma2 must be nonnegative, got {}", req.sigma2)));
    }
    if req.n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if req.theorem.uses_mu() {
        check_positive("mu", req.mu)?;
    }
    let n = req.n as f64;
    let s2 = req.sigma2;
    let ks = req.kernel_spectrum;
    let linear = |th: Theorem| {
        req.linear_spectrum.ok_or_else(|| Error::Incompatible(format!("{th} needs the covariance spectrum")))
    };

    let (var_linear, var_kernel) = match req.theorem {
        Theorem::T1 => {
            require_source("kernel", ks, &[SpectrumSource::EmpiricalK])?;
            (0.0, s2 / n * variance_trace(ks, req.lambda)?)
        }
        Theorem::T2 => {
            require_source("kernel", ks, &[SpectrumSource::EmpiricalQkq])?;
            (s2 * req.d as f64 / n, s2 / n * variance_trace(ks, req.lambda)?)
        }
        Theorem::T3 => {
            require_source("kernel", ks, &[SpectrumSource::Analytic])?;
            let r = kernel_complexity(&ks.clone().with_n_context(req.n), req.lambda)?;
            (s2 * req.d as f64 / n, s2 * r * r / req.lambda)
        }
        Theorem::T4 => {
            require_source("kernel", ks, &[SpectrumSource::EmpiricalQmuKQmu])?;
            let ls = linear(Theorem::T4)?;
            require_source("covariance", ls, &[SpectrumSource::EmpiricalSigma])?;
            let tau: f64 = ls.values.iter().map(|t| (t / (t + req.mu)).powi(2)).sum();
            (2.0 * s2 / n * tau, 2.0 * s2 / n * variance_trace(ks, req.lambda)?)
        }
        Theorem::T5 => {
            require_source("kernel", ks, &[SpectrumSource::Analytic])?;
            let ls = linear(Theorem::T5)?;
            require_source("covariance", ls, &[SpectrumSource::Analytic])?;
            let tau: f64 = ls.values.iter().map(|t| t / (t + req.mu)).sum();
            let r = kernel_complexity(&ks.clone().with_n_context(req.n), req.lambda)?;
            (s2 / n * tau, s2 * r * r / req.lambda)
        }
    };

    let mu = if req.theorem.uses_mu() { req.mu } else { 0.0 };
    let (bias, approx) = match &req.bias {
        BiasInput::Candidate(c) => {
            if c.approx_error < 0.0 || c.alpha_norm_sq < 0.0 || c.rkhs_norm_sq < 0.0 {
                return Err(Error::InvalidParameter("oracle candidate terms must be nonnegative".into()));
            }
            (req.lambda * c.rkhs_norm_sq, c.approx_error + mu * c.alpha_norm_sq)
        }
        BiasInput::Zero => (0.0, 0.0),
        BiasInput::Exact { f_star, kernel_matrix, x } => {
            let bias = match req.theorem {
                Theorem::T1 => krr_bias(kernel_matrix, f_star, req.lambda)?,
                th => {
                    let x = x
                        .as_ref()
                        .ok_or_else(|| Error::Incompatible(format!("{th} exact bias needs the design matrix")))?;
                    let factor = factor_design(x)?;
                    if th.uses_mu() {
                        akrr_ridge_bias(kernel_matrix, &factor, f_star, req.lambda, mu)?
                    } else {
                        akrr_bias(kernel_matrix, &factor, f_star, req.lambda)?
                    }
                }
            };
            (bias, 0.0)
        }
    };

    let total = bias + approx + var_linear + var_kernel;
    Ok(BoundReport {
        theorem: req.theorem,
        lambda: req.lambda,
        mu,
        sigma2: s2,
        bias,
        approx,
        var_linear,
        var_kernel,
        total,
        kernel_source: ks.source,
        linear_source: req.linear_spectrum.map(|s| s.source),
    })
}

fn check_f_star(k: &DMatrix<f64>, f_star: &DVector<f64>) -> Result<()> {
    if f_star.len() != k.nrows() {
        return Err(Error::DimensionMismatch { expected: k.nrows(), got: f_star.len() });
    }
    Ok(())
}

/// `(1/n) ||lambda (K + lambda I)^{-1} f*||^2`.
pub fn krr_bias(k: &DMatrix<f64>, f_star: &DVector<f64>, lambda: f64) -> Result<f64> {
    check_f_star(k, f_star)?;
    let v = solve_spd(k, lambda, f_star)? * lambda;
    Ok(v.norm_squared() / f_star.len() as f64)
}

/// `(1/n) ||lambda Q_X (V + lambda I)^{-1} Q_X f*||^2` with `V = Q_X K Q_X`.
pub fn akrr_bias(k: &DMatrix<f64>, factor: &DesignFactor, f_star: &DVector<f64>, lambda: f64) -> Result<f64> {
    check_f_star(k, f_star)?;
    let v = factor.project_both_sides(k);
    let inner = solve_spd(&v, lambda, &factor.apply_q_x(f_star)?)?;
    let out = factor.apply_q_x(&inner)? * lambda;
    Ok(out.norm_squared() / f_star.len() as f64)
}

/// Noiseless residual of the ridge variant, `(1/n) ||lambda c||^2` where `c`
/// is its dual when fitted to `f*` itself.
pub fn akrr_ridge_bias(
    k: &DMatrix<f64>,
    factor: &DesignFactor,
    f_star: &DVector<f64>,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    check_f_star(k, f_star)?;
    let w = factor.q_mu_weights(mu, true);
    let a = factor.sandwich(k, &w);
    let b = solve_spd(&a, lambda, &factor.apply_q_mu(mu, f_star, true)?)?;
    let c = factor.apply_q_mu(mu, &b, true)? * lambda;
    Ok(c.norm_squared() / f_star.len() as f64)
}

/// Exact fixed-design prediction risk split into bias and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskDecomposition {
    pub bias: f64,
    pub variance: f64,
}

impl RiskDecomposition {
    pub fn total(&self) -> f64 {
        self.bias + self.variance
    }
}

/// Exact risk of KRR under homoscedastic noise of variance `sigma2`.
pub fn exact_risk_krr(k: &DMatrix<f64>, f_star: &DVector<f64>, lambda: f64, sigma2: f64) -> Result<RiskDecomposition> {
    let bias = krr_bias(k, f_star, lambda)?;
    let mu_hat = spectrum(k, SpectrumSource::EmpiricalK)?;
    let variance = sigma2 / k.nrows() as f64 * variance_trace(&mu_hat, lambda)?;
    Ok(RiskDecomposition { bias, variance })
}

/// Exact risk of the additive estimator; its variance carries `rank(X)` for the OLS part.
pub fn exact_risk_akrr(
    k: &DMatrix<f64>,
    x: &DMatrix<f64>,
    f_star: &DVector<f64>,
    lambda: f64,
    sigma2: f64,
) -> Result<RiskDecomposition> {
    let factor = factor_design(x)?;
    let bias = akrr_bias(k, &factor, f_star, lambda)?;
    let nu = spectrum(&factor.project_both_sides(k), SpectrumSource::EmpiricalQkq)?;
    let variance = sigma2 / k.nrows() as f64 * (factor.rank() as f64 + variance_trace(&nu, lambda)?);
    Ok(RiskDecomposition { bias, variance })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenComparison {
    /// Every `nu_i <= mu_i + 1e-9`.
    pub holds: bool,
    /// `min_i (mu_i - nu_i)`.
    pub margin: f64,
    pub trace_mu: f64,
    pub trace_nu: f64,
}

/// Compares the spectra of `K` and of `Q_X K Q_X` elementwise and through
/// their variance traces at `lambda`.
pub fn check_eigen_comparison(mu: &EigenSpectrum, nu: &EigenSpectrum, lambda: f64) -> Result<EigenComparison> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: nu.len() });
    }
    let margin = mu.values.iter().zip(&nu.values).map(|(m, v)| m - v).fold(f64::INFINITY, f64::min);
    let margin = if mu.is_empty() { 0.0 } else { margin };
    Ok(EigenComparison {
        holds: margin >= -1e-9,
        margin,
        trace_mu: variance_trace(mu, lambda)?,
        trace_nu: variance_trace(nu, lambda)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepVarianceCheck {
    /// `Tr(V^2 (V + lambda)^{-2})`, the additive estimator's kernel variance.
    pub trace_joint: f64,
    /// `Tr(Q_X K^2 (K + lambda)^{-2})`, the two-step kernel variance.
    pub trace_two_step: f64,
    /// `rank(X)`.
    pub slack: usize,
    pub holds: bool,
}

/// Checks `Tr(V^2 V_lambda^{-2}) <= Tr(Q_X K^2 K_lambda^{-2}) + rank(X)`.
pub fn check_twostep_variance(k: &DMatrix<f64>, factor: &DesignFactor, lambda: f64) -> Result<TwoStepVarianceCheck> {
    check_positive("lambda", lambda)?;
    if k.nrows() != factor.n() {
        return Err(Error::DimensionMismatch { expected: factor.n(), got: k.nrows() });
    }
    let nu = spectrum(&factor.project_both_sides(k), SpectrumSource::EmpiricalQkq)?;
    let trace_joint = variance_trace(&nu, lambda)?;

    let eig = symmetric_eigen(k)?;
    let proj = factor.left_singular_vectors().tr_mul(&eig.vectors);
    let mut trace_two_step = 0.0;
    for (i, &m) in eig.values.iter().enumerate() {
        let s = m.max(0.0) / (m.max(0.0) + lambda);
        trace_two_step += s * s * (1.0 - proj.column(i).norm_squared());
    }
    let slack = factor.rank();
    Ok(TwoStepVarianceCheck {
        trace_joint,
        trace_two_step,
        slack,
        holds: trace_joint <= trace_two_step + slack as f64 + 1e-9,
    })
}

/// Whether `delta_n >= min(mu_1, 1) / (10 n)`.
pub fn delta_lower_bound_check(spec: &EigenSpectrum, n: usize) -> Result<bool> {
    let spec = spec.clone().with_n_context(n);
    let delta = critical_radius(&spec)?;
    Ok(delta >= spec.largest().min(1.0) / (10.0 * n as f64))
}
