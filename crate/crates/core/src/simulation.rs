//! Synthetic data-generating processes and Monte-Carlo risk estimation.
//!
//! Every replication derives its own seed from the master seed, so all
//! estimators in a run see the same training and test data for a given
//! replication and results do not depend on the thread schedule.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::design::symmetric_eigen;
use crate::error::{Error, Result};
use crate::estimators::{predict, Dataset, EstimatorKind, EstimatorSpec, FitParams};
use crate::kernels::KernelSpec;
use crate::model_selection::{cross_validate, median_bandwidth, TuningGrid};

/// Name of the generator recorded in output headers.
pub const RNG_NAME: &str = "ChaCha20";
/// Version tag of the risk CSV layout.
pub const RISK_FORMAT: &str = "akrrlab-risk v1";
/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "AKRRLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DgpKind {
    /// `f*(x) = 2x + alpha sin(2 pi x)`, `x ~ U(0, 1)`.
    Spline1d,
    /// `f*(x) = x^T (2, -1.5, 0.5) + alpha (sin(pi x1) + cos(pi x2 x3))`, `x ~ U(-2, 2)^3`.
    Gaussian3d,
    /// Correlated Gaussian design, `Sigma_jk = rho^(|j-k|/s)`, with an
    /// alternating-sign linear part and a mixed sinusoidal nonlinear part.
    HighDim { d: usize, rho: f64, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub kind: DgpKind,
    /// Strength of the nonlinear component.
    pub alpha: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl DgpSpec {
    pub fn spline1d(alpha: f64, seed: u64) -> Self {
        DgpSpec { kind: DgpKind::Spline1d, alpha, noise_sd: 1.5, seed }
    }

    pub fn gaussian3d(alpha: f64, seed: u64) -> Self {
        DgpSpec { kind: DgpKind::Gaussian3d, alpha, noise_sd: 1.0, seed }
    }

    pub fn highdim(d: usize, rho: f64, s: f64, alpha: f64, seed: u64) -> Self {
        DgpSpec { kind: DgpKind::HighDim { d, rho, s }, alpha, noise_sd: 1.0, seed }
    }

    pub fn with_noise_sd(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn d(&self) -> usize {
        match self.kind {
            DgpKind::Spline1d => 1,
            DgpKind::Gaussian3d => 3,
            DgpKind::HighDim { d, .. } => d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd > 0.0) {
            return Err(Error::InvalidParameter(format!("noise sd must be positive, got {}", self.noise_sd)));
        }
        if let DgpKind::HighDim { d, rho, s } = self.kind {
            if d < 2 {
                return Err(Error::InvalidParameter("highdim design needs d >= 2".into()));
            }
            if !(rho.abs() < 1.0) || !(s > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "highdim needs |rho| < 1 and s > 0, got rho={rho}, s={s}"
                )));
            }
        }
        Ok(())
    }

    /// Short description for output headers.
    pub fn summary(&self) -> String {
        match self.kind {
            DgpKind::Spline1d => format!("spline1d alpha={} noise_sd={}", self.alpha, self.noise_sd),
            DgpKind::Gaussian3d => format!("gaussian3d alpha={} noise_sd={}", self.alpha, self.noise_sd),
            DgpKind::HighDim { d, rho, s } => {
                format!("highdim d={d} rho={rho} s={s} alpha={} noise_sd={}", self.alpha, self.noise_sd)
            }
        }
    }

    /// The regression function at one covariate row.
    pub fn signal(&self, x: &[f64]) -> f64 {
        let a = self.alpha;
        match self.kind {
            DgpKind::Spline1d => 2.0 * x[0] + a * (2.0 * PI * x[0]).sin(),
            DgpKind::Gaussian3d => {
                2.0 * x[0] - 1.5 * x[1] + 0.5 * x[2] + a * ((PI * x[0]).sin() + (PI * x[1] * x[2]).cos())
            }
            DgpKind::HighDim { d, .. } => {
                let sd = (d as f64).sqrt();
                let linear: f64 = x.iter().enumerate().map(|(j, v)| if j % 2 == 0 { *v } else { -*v }).sum();
                let smooth: f64 = x.iter().map(|v| (PI * v).sin() + 0.5 * (2.0 * PI * v).cos()).sum();
                let pairs: f64 = x.windows(2).map(|w| (w[0] * w[1]).sin()).sum();
                linear / sd + a * (smooth / sd + pairs / (2.0 * ((d - 1) as f64).sqrt()))
            }
        }
    }
}

/// `Sigma_jk = rho^(|j-k|/s)`.
pub fn highdim_covariance(d: usize, rho: f64, s: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |j, k| rho.powf((j as f64 - k as f64).abs() / s))
}

/// Symmetric square root `S` with `S S^T = Sigma`.
pub fn covariance_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(sigma)?;
    let roots = DVector::from_iterator(eig.values.len(), eig.values.iter().map(|v| v.max(0.0).sqrt()));
    let scaled = &eig.vectors * DMatrix::from_diagonal(&roots);
    let mut s = scaled * eig.vectors.transpose();
    crate::design::symmetrize(&mut s);
    Ok(s)
}

/// Draws plus the noiseless signal at the drawn rows.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub signal: DVector<f64>,
}

pub fn generate(dgp: &DgpSpec, m: usize, include_noise: bool) -> Result<Simulated> {
    generate_with_stream(dgp, m, include_noise, 0)
}

/// Like [`generate`] but drawing from an independent stream of the seed.
pub fn generate_with_stream(dgp: &DgpSpec, m: usize, include_noise: bool, stream: u64) -> Result<Simulated> {
    dgp.validate()?;
    if m == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(dgp.seed);
    rng.set_stream(stream);
    let d = dgp.d();
    let x = match dgp.kind {
        DgpKind::Spline1d => DMatrix::from_fn(m, 1, |_, _| rng.gen::<f64>()),
        DgpKind::Gaussian3d => {
            let mut x = DMatrix::zeros(m, 3);
            for i in 0..m {
                for j in 0..3 {
                    x[(i, j)] = rng.gen_range(-2.0..2.0);
                }
            }
            x
        }
        DgpKind::HighDim { d, rho, s } => {
            let root = covariance_sqrt(&highdim_covariance(d, rho, s))?;
            let mut z = DMatrix::zeros(m, d);
            for i in 0..m {
                for j in 0..d {
                    z[(i, j)] = rng.sample::<f64, _>(StandardNormal);
                }
            }
            z * root
        }
    };
    let signal = DVector::from_iterator(
        m,
        (0..m).map(|i| {
            let row: Vec<f64> = (0..d).map(|j| x[(i, j)]).collect();
            dgp.signal(&row)
        }),
    );
    let mut y = signal.clone();
    if include_noise {
        for v in y.iter_mut() {
            *v += dgp.noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(Simulated { data: Dataset::new(x, y)?, signal })
}

/// Kernel used by a configured estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelChoice {
    None,
    Fixed(KernelSpec),
    /// Gaussian with the median-distance bandwidth of each training set.
    MedianGaussian,
    /// Gaussian with the bandwidth selected jointly by cross-validation.
    CvGaussian(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tuning {
    Fixed { lambda: f64, mu: f64 },
    Cv { lambdas: Vec<f64>, mus: Option<Vec<f64>>, folds: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub label: String,
    pub kind: EstimatorKind,
    pub kernel: KernelChoice,
    pub iterations: usize,
    pub tuning: Tuning,
}

impl EstimatorConfig {
    pub fn new(label: impl Into<String>, kind: EstimatorKind, kernel: KernelChoice, tuning: Tuning) -> Self {
        EstimatorConfig { label: label.into(), kind, kernel, iterations: FitParams::default().iterations, tuning }
    }

    pub fn ols() -> Self {
        EstimatorConfig::new("ols", EstimatorKind::Ols, KernelChoice::None, Tuning::Fixed { lambda: 0.0, mu: 0.0 })
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    fn kernel_tag(&self) -> &'static str {
        match &self.kernel {
            KernelChoice::None => "none",
            KernelChoice::Fixed(KernelSpec::Gaussian { .. }) => "gaussian",
            KernelChoice::Fixed(KernelSpec::PeriodicSpline { .. }) => "spline",
            KernelChoice::MedianGaussian => "gaussian_med",
            KernelChoice::CvGaussian(_) => "gaussian_cv",
        }
    }
}

/// Selected tuning and fit for one configured estimator on one training set.
#[derive(Debug, Clone)]
pub struct Tuned {
    pub model: crate::estimators::FittedModel,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub kernel: Option<KernelSpec>,
}

/// Resolves the kernel, tunes if configured, and refits on the full training set.
pub fn tune_and_fit(config: &EstimatorConfig, train: &Dataset, cv_seed: u64) -> Result<Tuned> {
    let kind = config.kind;
    let (base_kernel, gammas) = match &config.kernel {
        KernelChoice::None => (None, None),
        KernelChoice::Fixed(k) => (Some(*k), None),
        KernelChoice::MedianGaussian => (Some(KernelSpec::gaussian(median_bandwidth(&train.x)?)?), None),
        KernelChoice::CvGaussian(g) => (Some(KernelSpec::gaussian(g[0])?), Some(g.clone())),
    };
    let spec = EstimatorSpec::new(kind, base_kernel)?.with_iterations(config.iterations);
    match &config.tuning {
        Tuning::Fixed { lambda, mu } => {
            if gammas.is_some() {
                return Err(Error::Incompatible("a cross-validated bandwidth needs cross-validated tuning".into()));
            }
            let model = spec.fit(train, *lambda, *mu)?;
            Ok(Tuned {
                lambda: kind.uses_lambda().then_some(*lambda),
                mu: kind.uses_mu().then_some(*mu),
                kernel: spec.kernel,
                model,
            })
        }
        Tuning::Cv { .. } if kind == EstimatorKind::Ols => {
            let model = spec.fit(train, 0.0, 0.0)?;
            Ok(Tuned { model, lambda: None, mu: None, kernel: None })
        }
        Tuning::Cv { lambdas, mus, folds } => {
            let grid = TuningGrid {
                lambda_values: lambdas.clone(),
                mu_values: mus.clone(),
                gamma_values: gammas,
                folds: *folds,
                seed: cv_seed,
            };
            let cv = cross_validate(train, &spec, &grid)?;
            let kernel = cv.tuned_kernel(spec.kernel.as_ref());
            let tuned = EstimatorSpec { kernel, ..spec };
            let model = tuned.fit(train, cv.best_lambda.unwrap_or(0.0), cv.best_mu.unwrap_or(0.0))?;
            Ok(Tuned { model, lambda: cv.best_lambda, mu: cv.best_mu, kernel })
        }
    }
}

/// Monte-Carlo settings shared by every estimator of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct McSettings {
    pub experiment: String,
    pub n: usize,
    pub reps: usize,
    pub test_size: usize,
    /// Score against noisy test responses instead of the regression function.
    pub noisy_target: bool,
}

impl McSettings {
    pub fn new(experiment: impl Into<String>, n: usize, reps: usize) -> Self {
        McSettings { experiment: experiment.into(), n, reps, test_size: 500, noisy_target: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub experiment: String,
    pub estimator: String,
    pub kernel: String,
    /// Spline order or Gaussian bandwidth actually used.
    pub q_or_gamma: Option<f64>,
    pub alpha: f64,
    pub n: usize,
    pub rep: usize,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    /// `None` when the fit failed.
    pub test_risk: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskAggregate {
    pub estimator: String,
    pub alpha: f64,
    pub n: usize,
    pub mean_risk: f64,
    pub std_error: f64,
    pub count: usize,
    pub failures: usize,
    /// Mean of `ln lambda` over successful replications, when tuned.
    pub mean_log_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
    /// Extra `key=value` header lines.
    pub notes: Vec<String>,
}

pub const RISK_CSV_HEADER: [&str; 10] =
    ["experiment", "estimator", "kernel", "q_or_gamma", "alpha", "n", "rep", "lambda", "mu", "test_risk"];

impl RiskReport {
    pub fn extend(&mut self, other: RiskReport) {
        self.rows.extend(other.rows);
        for note in other.notes {
            if !self.notes.contains(&note) {
                self.notes.push(note);
            }
        }
    }

    /// Groups by `(estimator, alpha, n)` in order of first appearance.
    pub fn aggregates(&self) -> Vec<RiskAggregate> {
        let mut keys: Vec<(String, u64, usize)> = Vec::new();
        for r in &self.rows {
            let key = (r.estimator.clone(), r.alpha.to_bits(), r.n);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(estimator, alpha_bits, n)| {
                let group: Vec<&RiskRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.estimator == estimator && r.alpha.to_bits() == alpha_bits && r.n == n)
                    .collect();
                let risks: Vec<f64> = group.iter().filter_map(|r| r.test_risk).collect();
                let (mean, se) = mean_and_se(&risks);
                let logs: Vec<f64> =
                    group.iter().filter(|r| r.test_risk.is_some()).filter_map(|r| r.lambda.map(f64::ln)).collect();
                RiskAggregate {
                    estimator,
                    alpha: f64::from_bits(alpha_bits),
                    n,
                    mean_risk: mean,
                    std_error: se,
                    count: risks.len(),
                    failures: group.len() - risks.len(),
                    mean_log_lambda: (!logs.is_empty()).then(|| logs.iter().sum::<f64>() / logs.len() as f64),
                }
            })
            .collect()
    }

    pub fn aggregate(&self, estimator: &str, alpha: f64, n: usize) -> Option<RiskAggregate> {
        self.aggregates().into_iter().find(|a| a.estimator == estimator && a.alpha == alpha && a.n == n)
    }

    /// Per-replication risks of one group, indexed by replication.
    pub fn paired_risks(&self, estimator: &str, alpha: f64, n: usize) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.estimator == estimator && r.alpha == alpha && r.n == n)
            .filter_map(|r| r.test_risk.map(|t| (r.rep, t)))
            .collect()
    }

    /// CSV with `#` header lines followed by one row per replication and estimator.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[(String, String)]) -> Result<()> {
        writeln!(out, "# format={RISK_FORMAT}")?;
        writeln!(out, "# rng={RNG_NAME}")?;
        for (k, v) in header {
            writeln!(out, "# {k}={v}")?;
        }
        for note in &self.notes {
            writeln!(out, "# {note}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RISK_CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.estimator.clone(),
                r.kernel.clone(),
                opt(r.q_or_gamma),
                format!("{}", r.alpha),
                r.n.to_string(),
                r.rep.to_string(),
                opt(r.lambda),
                opt(r.mu),
                opt(r.test_risk),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Summary CSV: `experiment,estimator,alpha,n,mean_risk,std_error,count,failures,mean_log_lambda`.
    pub fn write_summary_csv<W: Write>(&self, experiment: &str, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "experiment",
            "estimator",
            "alpha",
            "n",
            "mean_risk",
            "std_error",
            "count",
            "failures",
            "mean_log_lambda",
        ])?;
        for a in self.aggregates() {
            w.write_record([
                experiment.to_string(),
                a.estimator.clone(),
                format!("{}", a.alpha),
                a.n.to_string(),
                format!("{:e}", a.mean_risk),
                format!("{:e}", a.std_error),
                a.count.to_string(),
                a.failures.to_string(),
                a.mean_log_lambda.map_or_else(String::new, |v| format!("{v:.6}")),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample mean and its standard error (zero for a single value).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let count = values.len();
    if count == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    if count == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` under master seed `master`.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    splitmix64(master ^ splitmix64(rep as u64))
}

/// Runs `f` on a pool capped by `AKRRLAB_THREADS` when that variable is set.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let threads: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
            if threads == 0 {
                return Err(Error::Parse(format!("{THREADS_ENV} must be positive")));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

fn one_replication(dgp: &DgpSpec, configs: &[EstimatorConfig], mc: &McSettings, rep: usize) -> Result<Vec<RiskRow>> {
    let seed = replication_seed(dgp.seed, rep);
    let rep_dgp = dgp.with_seed(seed);
    let train = generate_with_stream(&rep_dgp, mc.n, true, 0)?;
    let test = generate_with_stream(&rep_dgp, mc.test_size, mc.noisy_target, 1)?;
    let target = if mc.noisy_target { &test.data.y } else { &test.signal };
    let rows = configs
        .iter()
        .map(|config| {
            let outcome = tune_and_fit(config, &train.data, seed).and_then(|t| {
                let pred = predict(&t.model, &test.data.x)?;
                let risk = (pred - target).norm_squared() / mc.test_size as f64;
                Ok((t, risk))
            });
            let mut row = RiskRow {
                experiment: mc.experiment.clone(),
                estimator: config.label.clone(),
                kernel: config.kernel_tag().to_string(),
                q_or_gamma: match &config.kernel {
                    KernelChoice::Fixed(k) => Some(k.shape_parameter()),
                    _ => None,
                },
                alpha: dgp.alpha,
                n: mc.n,
                rep,
                lambda: None,
                mu: None,
                test_risk: None,
                error: None,
            };
            match outcome {
                Ok((t, risk)) => {
                    row.q_or_gamma = t.kernel.as_ref().map(|k| k.shape_parameter());
                    row.lambda = t.lambda;
                    row.mu = t.mu;
                    row.test_risk = Some(risk);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(rows)
}

/// Mean test risk of each configured estimator over `reps` fresh training sets.
pub fn mc_prediction_risk(dgp: &DgpSpec, configs: &[EstimatorConfig], mc: &McSettings) -> Result<RiskReport> {
    dgp.validate()?;
    if mc.reps == 0 || mc.test_size == 0 {
        return Err(Error::InvalidParameter("replications and test size must be positive".into()));
    }
    for c in configs {
        if let Tuning::Cv { folds, .. } = c.tuning {
            if folds > mc.n {
                return Err(Error::InvalidParameter(format!("{folds} folds exceed n = {}", mc.n)));
            }
        }
    }
    let per_rep = with_thread_cap(|| {
        (0..mc.reps).into_par_iter().map(|rep| one_replication(dgp, configs, mc, rep)).collect::<Result<Vec<_>>>()
    })??;
    let mut report =
        RiskReport { rows: per_rep.into_iter().flatten().collect(), notes: vec![format!("dgp={}", dgp.summary())] };
    let target = if mc.noisy_target { "noisy test responses" } else { "noiseless regression function" };
    report.notes.push(format!("risk_target={target}"));
    report.notes.push(format!("test_size={}", mc.test_size));
    Ok(report)
}

/// Absolute least-squares slope of `ln risk` on `ln n`.
pub fn log_log_slope(ns: &[usize], risks: &[f64]) -> Result<f64> {
    if ns.len() != risks.len() {
        return Err(Error::DimensionMismatch { expected: ns.len(), got: risks.len() });
    }
    let mut distinct = ns.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidParameter("slope needs at least three distinct sample sizes".into()));
    }
    if risks.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter("risks must be positive to take logs".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = risks.iter().map(|r| r.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok((sxy / sxx).abs())
}

/// Runs the harness at each sample size and returns the absolute log-log slope
/// of mean risk together with the underlying report.
pub fn convergence_slope(
    dgp: &DgpSpec,
    config: &EstimatorConfig,
    n_grid: &[usize],
    reps: usize,
    experiment: &str,
) -> Result<(f64, RiskReport)> {
    let mut report = RiskReport::default();
    let mut means = Vec::new();
    for &n in n_grid {
        let r = mc_prediction_risk(dgp, std::slice::from_ref(config), &McSettings::new(experiment, n, reps))?;
        let agg = r
            .aggregate(&config.label, dgp.alpha, n)
            .ok_or_else(|| Error::InvalidParameter("no successful replications".into()))?;
        means.push(agg.mean_risk);
        report.extend(r);
    }
    Ok((log_log_slope(n_grid, &means)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_selection::log_grid;

    #[test]
    fn spline_dgp_linear_case() {
        let s = generate(&DgpSpec::spline1d(0.0, 3), 50, false).unwrap();
        for i in 0..50 {
            assert_eq!(s.data.y[i], 2.0 * s.data.x[(i, 0)]);
            assert!((0.0..1.0).contains(&s.data.x[(i, 0)]));
        }
    }

    #[test]
    fn gaussian3d_signal() {
        let dgp = DgpSpec::gaussian3d(0.0, 1);
        assert!((dgp.signal(&[1.0, 1.0, 1.0]) - 1.0).abs() < 1e-15);
        let s = generate(&dgp, 20, false).unwrap();
        assert!(s.data.x.iter().all(|v| (-2.0..2.0).contains(v)));
    }

    #[test]
    fn generation_is_deterministic_and_noise_flag_only_adds_noise() {
        let dgp = DgpSpec::gaussian3d(1.0, 11);
        let a = generate(&dgp, 30, true).unwrap();
        let b = generate(&dgp, 30, true).unwrap();
        let c = generate(&dgp, 30, false).unwrap();
        assert_eq!(a.data.x, b.data.x);
        assert_eq!(a.data.y, b.data.y);
        assert_eq!(a.data.x, c.data.x);
        assert_eq!(c.data.y, c.signal);
        let other = generate_with_stream(&dgp, 30, true, 1).unwrap();
        assert_ne!(other.data.x, a.data.x);
    }

    #[test]
    fn highdim_covariance_root() {
        let sigma = highdim_covariance(20, 0.9, 6.0);
        let root = covariance_sqrt(&sigma).unwrap();
        assert!((&root * root.transpose() - &sigma).norm() <= 1e-10);
        assert_eq!(root, root.transpose());
    }

    #[test]
    fn invalid_dgps() {
        assert!(DgpSpec::highdim(10, 1.0, 1.0, 0.0, 0).validate().is_err());
        assert!(DgpSpec::highdim(10, 0.5, 0.0, 0.0, 0).validate().is_err());
        assert!(DgpSpec::spline1d(-1.0, 0).validate().is_err());
        assert!(generate(&DgpSpec::spline1d(0.0, 0), 0, true).is_err());
    }

    #[test]
    fn slope_examples() {
        let ns = [100, 200, 400, 800];
        let inv: Vec<f64> = ns.iter().map(|&n| 3.0 / n as f64).collect();
        assert!((log_log_slope(&ns, &inv).unwrap() - 1.0).abs() < 1e-12);
        assert!(log_log_slope(&ns, &[2.0; 4]).unwrap().abs() < 1e-12);
        assert!(log_log_slope(&[1, 2], &[1.0, 2.0]).is_err());
        assert!(log_log_slope(&ns, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn mean_and_se_values() {
        assert_eq!(mean_and_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn noiseless_ols_recovers_linear_signal() {
        let dgp = DgpSpec::spline1d(0.0, 5).with_noise_sd(1e-8);
        let r = mc_prediction_risk(&dgp, &[EstimatorConfig::ols()], &McSettings::new("t", 40, 3)).unwrap();
        assert!(r.rows.iter().all(|row| row.test_risk.unwrap() <= 1e-12));
    }

    #[test]
    fn single_replication_aggregate() {
        let dgp = DgpSpec::spline1d(1.0, 2);
        let cfg = EstimatorConfig::new(
            "krr",
            EstimatorKind::Krr,
            KernelChoice::Fixed(KernelSpec::spline(1.0, 100).unwrap()),
            Tuning::Cv { lambdas: log_grid(1e-4, 1.0, 5), mus: None, folds: 5 },
        );
        let r = mc_prediction_risk(&dgp, &[cfg], &McSettings::new("t", 40, 1)).unwrap();
        let agg = r.aggregate("krr", 1.0, 40).unwrap();
        assert_eq!(agg.count, 1);
        assert_eq!(agg.mean_risk, r.rows[0].test_risk.unwrap());
        assert_eq!(agg.std_error, 0.0);
        assert!(r.rows[0].lambda.is_some());
    }

    #[test]
    fn failures_are_recorded_not_aggregated() {
        let dgp = DgpSpec::spline1d(1.0, 2);
        let bad = EstimatorConfig::new(
            "bad",
            EstimatorKind::Krr,
            KernelChoice::CvGaussian(vec![1.0]),
            Tuning::Fixed { lambda: 0.1, mu: 0.0 },
        );
        let r = mc_prediction_risk(&dgp, &[bad, EstimatorConfig::ols()], &McSettings::new("t", 20, 2)).unwrap();
        let agg = r.aggregate("bad", 1.0, 20).unwrap();
        assert_eq!((agg.count, agg.failures), (0, 2));
        assert!(r.rows[0].error.is_some());
        assert_eq!(r.aggregate("ols", 1.0, 20).unwrap().count, 2);
    }

    #[test]
    fn csv_layout() {
        let dgp = DgpSpec::spline1d(0.5, 2);
        let r = mc_prediction_risk(&dgp, &[EstimatorConfig::ols()], &McSettings::new("demo", 20, 2)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, &[("seed".into(), "2".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# format=akrrlab-risk v1\n# rng=ChaCha20\n# seed=2\n"));
        assert!(text.contains("experiment,estimator,kernel,q_or_gamma,alpha,n,rep,lambda,mu,test_risk\n"));
        assert!(text.contains("\ndemo,ols,none,,0.5,20,0,,,"));
    }

    #[test]
    fn replication_seeds_differ() {
        let seeds: Vec<u64> = (0..100).map(|r| replication_seed(7, r)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
    }
}
