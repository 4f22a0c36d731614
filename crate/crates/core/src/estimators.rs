//! The seven predictors and their out-of-sample evaluation.
//!
//! Kernel parts are stored as a dual vector `c` with
//! `g(x) = (1/n) sum_i c_i K(X_i, x)`, so that `g` evaluated at the training
//! rows is exactly `K c` for the scaled kernel matrix `K = [K(X_i, X_j) / n]`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::design::{factor_design, solve_spd, DesignFactor};
use crate::error::{check_finite, Error, Result};
use crate::kernels::{cross_kernel, kernel_matrix, KernelSpec};

/// Relative change in successive in-sample fits below which the iterated
/// scheme stops early.
pub const ITERATION_TOLERANCE: f64 = 1e-10;

/// Covariates and responses.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidParameter("dataset must have at least one row and column".into()));
        }
        check_finite(x.as_slice(), "covariates")?;
        check_finite(y.as_slice(), "responses")?;
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(indices),
            y: DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.y[i])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Ols,
    LinearRidge,
    Krr,
    Akrr,
    AkrrRidge,
    TwoStep,
    Iterated,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Ols,
        EstimatorKind::LinearRidge,
        EstimatorKind::Krr,
        EstimatorKind::Akrr,
        EstimatorKind::AkrrRidge,
        EstimatorKind::TwoStep,
        EstimatorKind::Iterated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ols => "ols",
            EstimatorKind::LinearRidge => "linear_ridge",
            EstimatorKind::Krr => "krr",
            EstimatorKind::Akrr => "akrr",
            EstimatorKind::AkrrRidge => "akrr_ridge",
            EstimatorKind::TwoStep => "two_step",
            EstimatorKind::Iterated => "iterated",
        }
    }

    pub fn uses_kernel(self) -> bool {
        !matches!(self, EstimatorKind::Ols | EstimatorKind::LinearRidge)
    }

    pub fn uses_lambda(self) -> bool {
        self.uses_kernel()
    }

    pub fn uses_mu(self) -> bool {
        matches!(self, EstimatorKind::LinearRidge | EstimatorKind::AkrrRidge)
    }

    pub fn has_linear_part(self) -> bool {
        self != EstimatorKind::Krr
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown estimator `{s}`")))
    }
}

/// An estimator together with its kernel, without tuning parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub kernel: Option<KernelSpec>,
    /// Cap on backfitting rounds for the iterated kind.
    pub iterations: usize,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, kernel: Option<KernelSpec>) -> Result<Self> {
        if kind.uses_kernel() && kernel.is_none() {
            return Err(Error::Incompatible(format!("estimator `{kind}` requires a kernel")));
        }
        let kernel = if kind.uses_kernel() { kernel } else { None };
        Ok(EstimatorSpec { kind, kernel, iterations: FitParams::default().iterations })
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn fit(&self, data: &Dataset, lambda: f64, mu: f64) -> Result<FittedModel> {
        fit(self.kind, data, self.kernel.as_ref(), FitParams { lambda, mu, iterations: self.iterations })
    }
}

/// Tuning parameters for a single fit. Fields irrelevant to a kind are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub lambda: f64,
    pub mu: f64,
    pub iterations: usize,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams { lambda: 1e-2, mu: 0.0, iterations: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub kind: EstimatorKind,
    pub alpha: DVector<f64>,
    pub dual: DVector<f64>,
    pub train_x: DMatrix<f64>,
    pub kernel: Option<KernelSpec>,
    pub lambda: f64,
    pub mu: f64,
    /// Iterations actually run (iterated kind only).
    pub iterations: usize,
    /// In-sample fit at the training rows.
    pub fitted: DVector<f64>,
    pub warnings: Vec<String>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")))
    }
}

fn rank_warning(factor: &DesignFactor) -> Vec<String> {
    if factor.rank() < factor.d() {
        vec![format!("design is rank deficient (rank {} < d = {}); using the pseudoinverse", factor.rank(), factor.d())]
    } else {
        Vec::new()
    }
}

struct Parts {
    alpha: DVector<f64>,
    dual: DVector<f64>,
    iterations: usize,
    warnings: Vec<String>,
}

fn assemble(
    kind: EstimatorKind,
    data: &Dataset,
    kernel: Option<&KernelSpec>,
    kmat: Option<&DMatrix<f64>>,
    lambda: f64,
    mu: f64,
    parts: Parts,
) -> FittedModel {
    let mut fitted = &data.x * &parts.alpha;
    if let Some(k) = kmat {
        fitted += k * &parts.dual;
    }
    FittedModel {
        kind,
        alpha: parts.alpha,
        dual: parts.dual,
        train_x: data.x.clone(),
        kernel: kernel.cloned(),
        lambda,
        mu,
        iterations: parts.iterations,
        fitted,
        warnings: parts.warnings,
    }
}

pub fn fit_ols(data: &Dataset) -> Result<FittedModel> {
    let factor = factor_design(&data.x)?;
    let parts = Parts {
        alpha: factor.ols_coefficients(&data.y)?,
        dual: DVector::zeros(data.n()),
        iterations: 0,
        warnings: rank_warning(&factor),
    };
    Ok(assemble(EstimatorKind::Ols, data, None, None, 0.0, 0.0, parts))
}

pub fn fit_linear_ridge(data: &Dataset, mu: f64) -> Result<FittedModel> {
    let factor = factor_design(&data.x)?;
    let parts = Parts {
        alpha: factor.ridge_coefficients(mu, &data.y)?,
        dual: DVector::zeros(data.n()),
        iterations: 0,
        warnings: Vec::new(),
    };
    Ok(assemble(EstimatorKind::LinearRidge, data, None, None, 0.0, mu, parts))
}

pub fn fit_krr(data: &Dataset, kernel: &KernelSpec, lambda: f64) -> Result<FittedModel> {
    check_lambda(lambda)?;
    let k = kernel_matrix(kernel, &data.x)?.into_inner();
    let parts = Parts {
        alpha: DVector::zeros(data.d()),
        dual: solve_spd(&k, lambda, &data.y)?,
        iterations: 0,
        warnings: Vec::new(),
    };
    Ok(assemble(EstimatorKind::Krr, data, Some(kernel), Some(&k), lambda, 0.0, parts))
}

fn akrr_parts(factor: &DesignFactor, k: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<Parts> {
    let v = factor.project_both_sides(k);
    let c = solve_spd(&v, lambda, &factor.apply_q_x(y)?)?;
    // The exact solution lies in the residual space; strip rounding leakage.
    let c = factor.apply_q_x(&c)?;
    let alpha = factor.ols_coefficients(&(y - k * &c))?;
    Ok(Parts { alpha, dual: c, iterations: 0, warnings: rank_warning(factor) })
}

pub fn fit_akrr(data: &Dataset, kernel: &KernelSpec, lambda: f64) -> Result<FittedModel> {
    check_lambda(lambda)?;
    let factor = factor_design(&data.x)?;
    let k = kernel_matrix(kernel, &data.x)?.into_inner();
    let parts = akrr_parts(&factor, &k, &data.y, lambda)?;
    Ok(assemble(EstimatorKind::Akrr, data, Some(kernel), Some(&k), lambda, 0.0, parts))
}

pub fn fit_akrr_ridge(data: &Dataset, kernel: &KernelSpec, lambda: f64, mu: f64) -> Result<FittedModel> {
    check_lambda(lambda)?;
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be nonnegative, got {mu}")));
    }
    let factor = factor_design(&data.x)?;
    let k = kernel_matrix(kernel, &data.x)?.into_inner();
    let parts = if mu == 0.0 {
        akrr_parts(&factor, &k, &data.y, lambda)?
    } else {
        let weights = factor.q_mu_weights(mu, true);
        let a = factor.sandwich(&k, &weights);
        let b = solve_spd(&a, lambda, &factor.apply_q_mu(mu, &data.y, true)?)?;
        let c = factor.apply_q_mu(mu, &b, true)?;
        let alpha = factor.ridge_coefficients(mu, &(&data.y - &k * &c))?;
        Parts { alpha, dual: c, iterations: 0, warnings: Vec::new() }
    };
    Ok(assemble(EstimatorKind::AkrrRidge, data, Some(kernel), Some(&k), lambda, mu, parts))
}

fn iterate(
    factor: &DesignFactor,
    x: &DMatrix<f64>,
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    max_iter: usize,
) -> Result<Parts> {
    let tol = ITERATION_TOLERANCE * y.norm();
    let mut g = DVector::zeros(y.len());
    let mut prev_fit: Option<DVector<f64>> = None;
    let mut warnings = rank_warning(factor);
    let mut alpha = DVector::zeros(x.ncols());
    let mut c = DVector::zeros(y.len());
    let mut done = 0;
    let mut converged = false;
    for t in 1..=max_iter {
        alpha = factor.ols_coefficients(&(y - &g))?;
        let r = y - x * &alpha;
        c = solve_spd(k, lambda, &r)?;
        g = k * &c;
        let fit = x * &alpha + &g;
        done = t;
        if let Some(prev) = &prev_fit {
            if (&fit - prev).norm() < tol {
                converged = true;
                break;
            }
        }
        prev_fit = Some(fit);
    }
    if max_iter > 1 && !converged {
        warnings.push(format!("iterated fit did not converge within {max_iter} iterations"));
    }
    Ok(Parts { alpha, dual: c, iterations: done, warnings })
}

/// OLS on the raw responses, then KRR on the OLS residuals.
pub fn fit_two_step(data: &Dataset, kernel: &KernelSpec, lambda: f64) -> Result<FittedModel> {
    check_lambda(lambda)?;
    let factor = factor_design(&data.x)?;
    let k = kernel_matrix(kernel, &data.x)?.into_inner();
    let parts = iterate(&factor, &data.x, &k, &data.y, lambda, 1)?;
    Ok(assemble(EstimatorKind::TwoStep, data, Some(kernel), Some(&k), lambda, 0.0, parts))
}

/// Alternates OLS and KRR backfitting steps, starting from `g = 0`.
pub fn fit_iterated(data: &Dataset, kernel: &KernelSpec, lambda: f64, max_iter: usize) -> Result<FittedModel> {
    check_lambda(lambda)?;
    if max_iter == 0 {
        return Err(Error::InvalidParameter("iteration count must be at least 1".into()));
    }
    let factor = factor_design(&data.x)?;
    let k = kernel_matrix(kernel, &data.x)?.into_inner();
    let parts = iterate(&factor, &data.x, &k, &data.y, lambda, max_iter)?;
    Ok(assemble(EstimatorKind::Iterated, data, Some(kernel), Some(&k), lambda, 0.0, parts))
}

/// Dispatches on `kind`. Kernel kinds require `kernel`.
pub fn fit(kind: EstimatorKind, data: &Dataset, kernel: Option<&KernelSpec>, params: FitParams) -> Result<FittedModel> {
    let need_kernel = || kernel.ok_or_else(|| Error::Incompatible(format!("estimator `{kind}` requires a kernel")));
    match kind {
        EstimatorKind::Ols => fit_ols(data),
        EstimatorKind::LinearRidge => fit_linear_ridge(data, params.mu),
        EstimatorKind::Krr => fit_krr(data, need_kernel()?, params.lambda),
        EstimatorKind::Akrr => fit_akrr(data, need_kernel()?, params.lambda),
        EstimatorKind::AkrrRidge => fit_akrr_ridge(data, need_kernel()?, params.lambda, params.mu),
        EstimatorKind::TwoStep => fit_two_step(data, need_kernel()?, params.lambda),
        EstimatorKind::Iterated => fit_iterated(data, need_kernel()?, params.lambda, params.iterations),
    }
}

/// `x_new alpha + (1/n) sum_i c_i K(X_i, x_new)` row by row.
pub fn predict(model: &FittedModel, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x_new.ncols() != model.train_x.ncols() {
        return Err(Error::DimensionMismatch { expected: model.train_x.ncols(), got: x_new.ncols() });
    }
    check_finite(x_new.as_slice(), "prediction covariates")?;
    let mut out = x_new * &model.alpha;
    if let Some(kernel) = &model.kernel {
        let cross = cross_kernel(kernel, x_new, &model.train_x)?;
        out += cross * &model.dual / model.train_x.nrows() as f64;
    }
    Ok(out)
}

/// `(1/n)||Y - X alpha - K c||^2 + mu ||alpha||^2 + (lambda/n) c^T K c`
/// with `K` the scaled kernel matrix. The penalty equals `lambda ||g||_H^2`.
pub fn joint_objective(
    data: &Dataset,
    k: &DMatrix<f64>,
    alpha: &DVector<f64>,
    dual: &DVector<f64>,
    lambda: f64,
    mu: f64,
) -> f64 {
    let n = data.n() as f64;
    let kc = k * dual;
    let resid = &data.y - &data.x * alpha - &kc;
    resid.norm_squared() / n + mu * alpha.norm_squared() + lambda * dual.dot(&kc) / n
}

const MODEL_MAGIC: &str = "akrrlab-model v1";

fn fmt_floats<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
}

fn parse_floats(line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{what}: `{t}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::Parse(format!("{what}: expected {expected} values, got {}", values.len())));
    }
    Ok(values)
}

impl FittedModel {
    pub fn n(&self) -> usize {
        self.train_x.nrows()
    }

    pub fn d(&self) -> usize {
        self.train_x.ncols()
    }

    /// Line-oriented text form; floats carry 17 significant digits.
    pub fn to_text(&self) -> String {
        let kernel = self.kernel.as_ref().map_or_else(|| "none".to_string(), |k| k.to_string());
        let mut out = format!(
            "{MODEL_MAGIC} kind={} n={} d={} lambda={:.16e} mu={:.16e} kernel={kernel}\n",
            self.kind,
            self.n(),
            self.d(),
            self.lambda,
            self.mu
        );
        out.push_str(&format!("alpha: {}\n", fmt_floats(self.alpha.iter())));
        out.push_str(&format!("dual: {}\n", fmt_floats(self.dual.iter())));
        for row in self.train_x.row_iter() {
            out.push_str(&fmt_floats(row.iter()));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<FittedModel> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty model file".into()))?;
        let fields = header
            .strip_prefix(MODEL_MAGIC)
            .ok_or_else(|| Error::Parse(format!("model header must start with `{MODEL_MAGIC}`")))?;
        let (mut kind, mut n, mut d, mut lambda, mut mu, mut kernel) = (None, None, None, None, None, None);
        for field in fields.split_whitespace() {
            let (key, value) =
                field.split_once('=').ok_or_else(|| Error::Parse(format!("malformed header field `{field}`")))?;
            let bad = |e: &dyn fmt::Display| Error::Parse(format!("header field `{key}`: {e}"));
            match key {
                "kind" => kind = Some(value.parse::<EstimatorKind>()?),
                "n" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "d" => d = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "lambda" => lambda = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "mu" => mu = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "kernel" => kernel = Some(if value == "none" { None } else { Some(value.parse::<KernelSpec>()?) }),
                _ => return Err(Error::Parse(format!("unknown header field `{key}`"))),
            }
        }
        let missing = |name: &str| Error::Parse(format!("model header lacks `{name}`"));
        let kind = kind.ok_or_else(|| missing("kind"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let d = d.ok_or_else(|| missing("d"))?;
        let kernel = kernel.ok_or_else(|| missing("kernel"))?;
        if kind.uses_kernel() != kernel.is_some() {
            return Err(Error::Parse(format!("kernel field inconsistent with kind `{kind}`")));
        }

        let mut tagged = |tag: &str, count: usize| -> Result<Vec<f64>> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing `{tag}` line")))?;
            let body = line.strip_prefix(tag).ok_or_else(|| Error::Parse(format!("expected `{tag}` line")))?;
            parse_floats(body, count, tag)
        };
        let alpha = DVector::from_vec(tagged("alpha:", d)?);
        let dual = DVector::from_vec(tagged("dual:", n)?);
        let mut rows = Vec::with_capacity(n * d);
        for i in 0..n {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("expected {n} training rows, found {i}")))?;
            rows.extend(parse_floats(line, d, "training row")?);
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing content after training rows".into()));
        }
        let train_x = DMatrix::from_row_slice(n, d, &rows);
        let mut model = FittedModel {
            kind,
            alpha,
            dual,
            train_x,
            kernel,
            lambda: lambda.ok_or_else(|| missing("lambda"))?,
            mu: mu.ok_or_else(|| missing("mu"))?,
            iterations: 0,
            fitted: DVector::zeros(n),
            warnings: Vec::new(),
        };
        let train = model.train_x.clone();
        model.fitted = predict(&model, &train)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FittedModel> {
        FittedModel::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kernel_eval;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, n: usize, d: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(n, |i, _| (3.0f64 * x[(i, 0)]).sin() + rng.gen_range(-0.3..0.3));
        Dataset::new(x, y).unwrap()
    }

    fn gauss() -> KernelSpec {
        KernelSpec::gaussian(1.5).unwrap()
    }

    fn scaled_k(data: &Dataset, kernel: &KernelSpec) -> DMatrix<f64> {
        kernel_matrix(kernel, &data.x).unwrap().into_inner()
    }

    /// Plain gradient descent on the joint objective over `(alpha, c)`.
    fn gradient_descent_minimum(data: &Dataset, k: &DMatrix<f64>, lambda: f64, mu: f64, steps: usize) -> f64 {
        let n = data.n();
        let d = data.d();
        let nf = n as f64;
        let mut alpha = DVector::zeros(d);
        let mut c = DVector::zeros(n);
        // Lipschitz bound of the gradient for a safe step size.
        let big = DMatrix::from_fn(n, d + n, |i, j| if j < d { data.x[(i, j)] } else { k[(i, j - d)] });
        let l = 2.0 * (big.transpose() * &big).norm() / nf + 2.0 * mu + 2.0 * lambda * k.norm() / nf;
        let step = 1.0 / l;
        for _ in 0..steps {
            let kc = k * &c;
            let r = &data.y - &data.x * &alpha - &kc;
            let ga = -2.0 / nf * data.x.transpose() * &r + 2.0 * mu * &alpha;
            let gc = -2.0 / nf * k * &r + 2.0 * lambda / nf * &kc;
            alpha -= step * ga;
            c -= step * gc;
        }
        joint_objective(data, k, &alpha, &c, lambda, mu)
    }

    #[test]
    fn dataset_validation() {
        let x = DMatrix::zeros(3, 1);
        assert!(Dataset::new(x.clone(), DVector::zeros(2)).is_err());
        let mut y = DVector::zeros(3);
        y[1] = f64::NAN;
        assert!(Dataset::new(x, y).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("lasso".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn ols_examples() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, -1.0, 0.5]);
        let data = Dataset::new(x.clone(), &x.column(0) * 2.0).unwrap();
        let m = fit_ols(&data).unwrap();
        assert!((m.alpha[0] - 2.0).abs() < 1e-12);
        assert!((&m.fitted - &data.y).norm() < 1e-12);

        let x = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, 2.0, 3.0]);
        let m = fit_ols(&Dataset::new(x, y).unwrap()).unwrap();
        assert!(m.alpha[0].abs() < 1e-14);

        let data = random_data(1, 20, 3);
        let m = fit_ols(&data).unwrap();
        let resid = &data.y - &m.fitted;
        for j in 0..3 {
            assert!(data.x.column(j).dot(&resid).abs() < 1e-10);
        }
    }

    #[test]
    fn ols_rank_deficient_warns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let m = fit_ols(&Dataset::new(x, DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap()).unwrap();
        assert_eq!(m.warnings.len(), 1);
        assert!((m.alpha[0] - 0.5).abs() < 1e-12 && (m.alpha[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn linear_ridge_examples() {
        let data = random_data(2, 15, 4);
        let huge = fit_linear_ridge(&data, 1e12).unwrap();
        assert!(huge.alpha.norm() < 1e-10 && huge.fitted.norm() < 1e-10);
        let tiny = fit_linear_ridge(&data, 1e-12).unwrap();
        let ols = fit_ols(&data).unwrap();
        assert!((&tiny.alpha - &ols.alpha).norm() < 1e-6);
        assert!(fit_linear_ridge(&data, 0.0).is_err());

        let mu = 0.3;
        let m = fit_linear_ridge(&data, mu).unwrap();
        let k = DMatrix::zeros(15, 15);
        let best = gradient_descent_minimum(&data, &k, 0.0, mu, 20000);
        let ours = joint_objective(&data, &k, &m.alpha, &DVector::zeros(15), 0.0, mu);
        assert!(ours <= best + 1e-10);
        // Strong convexity pins the minimizer itself.
        let gd = {
            let nf = 15.0;
            let mut a: DVector<f64> = DVector::zeros(4);
            let l = 2.0 * (data.x.transpose() * &data.x).norm() / nf + 2.0 * mu;
            for _ in 0..20000 {
                let g = -2.0 / nf * data.x.transpose() * (&data.y - &data.x * &a) + 2.0 * mu * &a;
                a -= g / l;
            }
            a
        };
        assert!((&m.alpha - gd).norm() < 1e-6);
    }

    #[test]
    fn krr_examples() {
        let data = random_data(3, 8, 1);
        let m = fit_krr(&data, &gauss(), 1e12).unwrap();
        assert!(m.fitted.norm() < 1e-10);
        assert!(m.alpha.iter().all(|&a| a == 0.0));

        let one = Dataset::new(DMatrix::from_element(1, 1, 0.3), DVector::from_element(1, 2.0)).unwrap();
        let m = fit_krr(&one, &gauss(), 0.5).unwrap();
        assert!((m.fitted[0] - 2.0 / 1.5).abs() < 1e-14);

        let k = scaled_k(&data, &gauss());
        let lambda = 0.05;
        let m = fit_krr(&data, &gauss(), lambda).unwrap();
        let zero = DVector::zeros(1);
        let base = joint_objective(&data, &k, &zero, &m.dual, lambda, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let scale = rng.gen_range(1e-4..1.0);
            let dc = DVector::from_fn(8, |_, _| scale * rng.gen_range(-1.0..1.0));
            let probe = joint_objective(&data, &k, &zero, &(&m.dual + dc), lambda, 0.0);
            assert!(base <= probe + 1e-12);
        }
    }

    #[test]
    fn akrr_linear_signal_is_exact() {
        let data = random_data(4, 12, 2);
        let alpha_star = DVector::from_vec(vec![1.5, -0.7]);
        let lin = Dataset::new(data.x.clone(), &data.x * &alpha_star).unwrap();
        for lambda in [1e-3, 1.0, 1e3] {
            let m = fit_akrr(&lin, &gauss(), lambda).unwrap();
            assert!(m.dual.norm() < 1e-10);
            assert!((&m.alpha - &alpha_star).norm() < 1e-10);
            assert!((&m.fitted - &lin.y).norm() < 1e-10);
        }
        for m in [
            fit_akrr_ridge(&lin, &gauss(), 0.1, 0.0).unwrap(),
            fit_two_step(&lin, &gauss(), 0.1).unwrap(),
            fit_iterated(&lin, &gauss(), 0.1, 5).unwrap(),
        ] {
            assert!(m.dual.norm() < 1e-10, "{}", m.kind);
            assert!((&m.fitted - &lin.y).norm() < 1e-10, "{}", m.kind);
        }
    }

    #[test]
    fn akrr_fit_formula_and_residual_space() {
        let data = random_data(5, 10, 2);
        let kernel = gauss();
        let m = fit_akrr(&data, &kernel, 0.05).unwrap();
        let f = factor_design(&data.x).unwrap();
        let k = scaled_k(&data, &kernel);
        let expected = f.apply_p_x(&data.y).unwrap() + f.apply_q_x(&(&k * &m.dual)).unwrap();
        assert!((&m.fitted - expected).norm() < 1e-9);
        assert!(f.apply_p_x(&m.dual).unwrap().norm() <= 1e-9 * m.dual.norm());

        let huge = fit_akrr(&data, &kernel, 1e12).unwrap();
        assert!((huge.fitted - f.apply_p_x(&data.y).unwrap()).norm() <= 1e-8 * data.y.norm());
    }

    #[test]
    fn joint_minimization_oracle() {
        let kernel = gauss();
        for seed in 0..5 {
            let data = random_data(100 + seed, 6, 2);
            let k = scaled_k(&data, &kernel);
            let m = fit_akrr(&data, &kernel, 0.1).unwrap();
            let ours = joint_objective(&data, &k, &m.alpha, &m.dual, 0.1, 0.0);
            let best = gradient_descent_minimum(&data, &k, 0.1, 0.0, 10000);
            assert!(ours <= best + 1e-8, "akrr {ours} vs {best}");

            let m = fit_akrr_ridge(&data, &kernel, 0.1, 0.2).unwrap();
            let ours = joint_objective(&data, &k, &m.alpha, &m.dual, 0.1, 0.2);
            let best = gradient_descent_minimum(&data, &k, 0.1, 0.2, 10000);
            assert!(ours <= best + 1e-8, "ridge {ours} vs {best}");
        }
    }

    #[test]
    fn ridge_variant_limits() {
        let data = random_data(6, 12, 2);
        let kernel = gauss();
        let ynorm = data.y.norm();
        let krr = fit_krr(&data, &kernel, 0.1).unwrap();
        let mu_big = fit_akrr_ridge(&data, &kernel, 0.1, 1e12).unwrap();
        assert!((&mu_big.fitted - &krr.fitted).norm() <= 1e-6 * ynorm);

        let lr = fit_linear_ridge(&data, 0.4).unwrap();
        let lam_big = fit_akrr_ridge(&data, &kernel, 1e12, 0.4).unwrap();
        assert!((&lam_big.fitted - &lr.fitted).norm() <= 1e-6 * ynorm);

        let akrr = fit_akrr(&data, &kernel, 0.1).unwrap();
        let mu_small = fit_akrr_ridge(&data, &kernel, 0.1, 1e-12).unwrap();
        assert!((&mu_small.fitted - &akrr.fitted).norm() <= 1e-6 * ynorm);
        let mu_zero = fit_akrr_ridge(&data, &kernel, 0.1, 0.0).unwrap();
        assert!((&mu_zero.fitted - &akrr.fitted).norm() <= 1e-12 * ynorm);

        let ols = fit_ols(&data).unwrap();
        let akrr_big = fit_akrr(&data, &kernel, 1e12).unwrap();
        assert!((&akrr_big.fitted - &ols.fitted).norm() <= 1e-6 * ynorm);

        let m = fit_akrr_ridge(&data, &kernel, 0.1, 0.3).unwrap();
        let f = factor_design(&data.x).unwrap();
        let k = scaled_k(&data, &kernel);
        let expected = f.apply_p_mu(0.3, &data.y).unwrap() + f.apply_q_mu(0.3, &(&k * &m.dual), false).unwrap();
        assert!((&m.fitted - expected).norm() < 1e-9);
    }

    #[test]
    fn two_step_and_iterated() {
        let data = random_data(7, 10, 2);
        let kernel = gauss();
        let two = fit_two_step(&data, &kernel, 0.1).unwrap();
        let one = fit_iterated(&data, &kernel, 0.1, 1).unwrap();
        assert_eq!(two.fitted, one.fitted);
        assert_eq!(two.dual, one.dual);

        let f = factor_design(&data.x).unwrap();
        let k = scaled_k(&data, &kernel);
        let c = solve_spd(&k, 0.1, &f.apply_q_x(&data.y).unwrap()).unwrap();
        assert!((&two.dual - &c).norm() < 1e-10);
        let expected = f.apply_p_x(&data.y).unwrap() + &k * &c;
        assert!((&two.fitted - expected).norm() < 1e-9);

        let akrr = fit_akrr(&data, &kernel, 0.1).unwrap();
        assert!((&two.fitted - &akrr.fitted).norm() > 1e-6);
        let it = fit_iterated(&data, &kernel, 0.1, 200).unwrap();
        assert!((&it.fitted - &akrr.fitted).norm() <= 1e-6 * data.y.norm());
        assert!(it.iterations <= 200);

        let huge = fit_two_step(&data, &kernel, 1e12).unwrap();
        assert!((huge.fitted - f.apply_p_x(&data.y).unwrap()).norm() < 1e-8);
        assert!(fit_iterated(&data, &kernel, 0.1, 0).is_err());
    }

    #[test]
    fn predict_matches_naive_loop() {
        let data = random_data(8, 12, 2);
        let kernel = gauss();
        for kind in EstimatorKind::ALL {
            let params = FitParams { lambda: 0.05, mu: 0.2, iterations: 20 };
            let m = fit(kind, &data, Some(&kernel), params).unwrap();
            let at_train = predict(&m, &data.x).unwrap();
            assert!((&at_train - &m.fitted).norm() < 1e-9, "{kind}");
        }

        let m = fit_akrr(&data, &kernel, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let xnew = DMatrix::from_fn(50, 2, |_, _| rng.gen_range(-1.5..1.5));
        let got = predict(&m, &xnew).unwrap();
        for i in 0..50 {
            let row: Vec<f64> = xnew.row(i).iter().copied().collect();
            let mut v = row[0] * m.alpha[0] + row[1] * m.alpha[1];
            for j in 0..12 {
                let train: Vec<f64> = data.x.row(j).iter().copied().collect();
                v += m.dual[j] * kernel_eval(&kernel, &train, &row).unwrap() / 12.0;
            }
            assert!((got[i] - v).abs() < 1e-12);
        }
        assert!(predict(&m, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn zero_dual_predicts_linear() {
        let data = random_data(11, 5, 2);
        let mut m = fit_akrr(&data, &gauss(), 0.1).unwrap();
        m.dual = DVector::zeros(5);
        m.alpha = DVector::from_vec(vec![2.0, -1.0]);
        let xnew = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.5, -2.0]);
        let p = predict(&m, &xnew).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 3.0]);
    }

    #[test]
    fn fit_requires_kernel_for_kernel_kinds() {
        let data = random_data(12, 5, 1);
        assert!(matches!(fit(EstimatorKind::Krr, &data, None, FitParams::default()), Err(Error::Incompatible(_))));
        assert!(fit(EstimatorKind::Ols, &data, None, FitParams::default()).is_ok());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let data = random_data(13, 9, 2);
        for kind in EstimatorKind::ALL {
            let params = FitParams { lambda: 0.037, mu: 0.11, iterations: 3 };
            let m = fit(kind, &data, Some(&KernelSpec::gaussian(0.7).unwrap()), params).unwrap();
            let text = m.to_text();
            assert!(text.starts_with(&format!("akrrlab-model v1 kind={kind} n=9 d=2")));
            let back = FittedModel::from_text(&text).unwrap();
            assert_eq!(back.kind, m.kind);
            assert_eq!(back.alpha, m.alpha);
            assert_eq!(back.dual, m.dual);
            assert_eq!(back.train_x, m.train_x);
            assert_eq!(back.lambda, m.lambda);
            assert_eq!(back.mu, m.mu);
            assert_eq!(back.kernel, m.kernel);
            assert_eq!(back.to_text(), text);
        }
        let spline = fit_krr(
            &Dataset::new(DMatrix::from_column_slice(3, 1, &[0.1, 0.4, 0.8]), DVector::from_vec(vec![1.0, 0.0, -1.0]))
                .unwrap(),
            &KernelSpec::spline(2.0, 50).unwrap(),
            0.01,
        )
        .unwrap();
        let back = FittedModel::from_text(&spline.to_text()).unwrap();
        assert_eq!(back.kernel, spline.kernel);
    }

    #[test]
    fn malformed_model_text() {
        assert!(FittedModel::from_text("").is_err());
        assert!(FittedModel::from_text("bogus header").is_err());
        let data = random_data(14, 3, 1);
        let text = fit_ols(&data).unwrap().to_text();
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(FittedModel::from_text(&truncated).is_err());
        assert!(FittedModel::from_text(&text.replace("kind=ols", "kind=lasso")).is_err());
    }
}
