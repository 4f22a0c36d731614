//! Command-line front end: `fit`, `predict`, `tune`, `theory`, `reproduce`
//! and `config dump`.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure,
//! 4 a registered reproduction check failed.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::factor_design;
use crate::error::{Error, Result};
use crate::estimators::{predict, Dataset, EstimatorKind, EstimatorSpec, FittedModel};
use crate::experiments::{reproduce, Scale};
use crate::kernels::{kernel_matrix, KernelSpec};
use crate::model_selection::{cross_validate, log_grid, CvResult, TuningGrid};
use crate::theory::{
    analytic_spectrum, bound_report, critical_radius, kernel_complexity, spectrum, statistical_dimension,
    variance_trace, AnalyticDecay, BiasInput, BoundReport, BoundRequest, EigenSpectrum, SpectrumSource, Theorem,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "akrrlab", version, about = "Additive kernel ridge regression toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an estimator to a `y,x1..xd` CSV and save the model.
    Fit(RunFlags),
    /// Predict with a saved model on a feature CSV.
    Predict(RunFlags),
    /// Cross-validate over a tuning grid and write the CV curve.
    Tune(RunFlags),
    /// Spectral quantities and risk-bound reports.
    Theory(TheoryFlags),
    /// Run a registered simulation experiment.
    Reproduce(ReproduceFlags),
    /// Configuration file utilities.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Debug, Subcommand)]
enum ConfigAction {
    /// Print the merged configuration with resolved paths.
    Dump(RunFlags),
}

#[derive(Debug, Args, Default, Clone)]
struct RunFlags {
    /// Configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV (training data for fit/tune, features for predict).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    estimator: Option<String>,
    /// `gaussian:gamma=<f>` or `spline:q=<f>,M=<n>`.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// `lo:hi:count` (log-spaced) or a comma-separated list.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    mu_grid: Option<String>,
    #[arg(long)]
    gamma_grid: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model file (written by fit, read by predict).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct ReproduceFlags {
    /// Experiment id.
    id: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving the CSV bundle.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct TheoryFlags {
    /// critical-radius, stat-dim, variance-trace, complexity, report or bound.
    #[arg(long, default_value = "report")]
    op: String,
    /// Analytic decay, `polynomial:beta=<f>` or `exponential:gamma=<f>`.
    #[arg(long)]
    spectrum: Option<String>,
    /// Explicit eigenvalues, comma-separated.
    #[arg(long)]
    values: Option<String>,
    /// Number of analytic eigenvalues kept.
    #[arg(long, default_value_t = 5000)]
    length: usize,
    /// Sample size entering the complexity `R(delta)`.
    #[arg(long)]
    n: Option<usize>,
    /// Training CSV for empirical spectra.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    theorem: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long)]
    mu: Option<f64>,
    /// Analytic covariance spectrum for the random-design ridge bound.
    #[arg(long)]
    linear_spectrum: Option<String>,
    /// `zero`, or `exact` to treat the data's response column as noiseless.
    #[arg(long, default_value = "zero")]
    bias: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Persistent form of a run, one section per concern.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub estimator: EstimatorSection,
    pub tuning: TuningSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub kind: Option<String>,
    pub kernel: Option<String>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningSection {
    pub lambda_grid: Option<String>,
    pub mu_grid: Option<String>,
    pub gamma_grid: Option<String>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub id: Option<String>,
    pub scale: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub model: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub cv: Option<PathBuf>,
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a configuration file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        let mut config = RunConfig::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.resolve_paths(&base);
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {}", e.message())))
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.data.train);
        fix(&mut self.data.features);
        fix(&mut self.output.model);
        fix(&mut self.output.predictions);
        fix(&mut self.output.cv);
        fix(&mut self.output.dir);
    }

    fn absolutize(&mut self) -> Result<()> {
        let cwd = std::env::current_dir()?;
        self.resolve_paths(&cwd);
        Ok(())
    }
}

/// Loads the optional config file and lays the flags over it.
fn merged_config(flags: &RunFlags, command: &str) -> Result<RunConfig> {
    let mut c = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &flags.data {
        if command == "predict" {
            c.data.features = Some(d.clone());
        } else {
            c.data.train = Some(d.clone());
        }
    }
    let set = |slot: &mut Option<String>, v: &Option<String>| {
        if v.is_some() {
            slot.clone_from(v);
        }
    };
    set(&mut c.estimator.kind, &flags.estimator);
    set(&mut c.estimator.kernel, &flags.kernel);
    set(&mut c.tuning.lambda_grid, &flags.lambda_grid);
    set(&mut c.tuning.mu_grid, &flags.mu_grid);
    set(&mut c.tuning.gamma_grid, &flags.gamma_grid);
    if flags.lambda.is_some() {
        c.estimator.lambda = flags.lambda;
    }
    if flags.mu.is_some() {
        c.estimator.mu = flags.mu;
    }
    if flags.iterations.is_some() {
        c.estimator.iterations = flags.iterations;
    }
    if flags.folds.is_some() {
        c.tuning.folds = flags.folds;
    }
    if flags.seed.is_some() {
        c.tuning.seed = flags.seed;
    }
    if let Some(m) = &flags.model {
        c.output.model = Some(m.clone());
    }
    if let Some(o) = &flags.output {
        match command {
            "predict" => c.output.predictions = Some(o.clone()),
            "tune" => c.output.cv = Some(o.clone()),
            _ => {}
        }
    }
    c.absolutize()?;
    Ok(c)
}

/// `lo:hi:count` on the log scale, or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("grid must be `lo:hi:count` or a comma list, got `{text}`"));
    let t = text.trim();
    let values = if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidParameter(format!("log grid needs 0 < lo <= hi, got {lo}:{hi}")));
        }
        log_grid(lo, hi, count)
    } else if t.is_empty() {
        Vec::new()
    } else {
        t.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(Error::InvalidParameter("grid is empty".into()));
    }
    Ok(values)
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{}: row {}: `{v}` is not a number", path.display(), line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn check_x_columns(path: &Path, names: &[String]) -> Result<()> {
    for (j, name) in names.iter().enumerate() {
        let want = format!("x{}", j + 1);
        if *name != want {
            return Err(Error::Parse(format!("{}: expected column `{want}`, found `{name}`", path.display())));
        }
    }
    Ok(())
}

fn to_matrix(rows: &[Vec<f64>], skip: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j + skip])
}

/// Reads a CSV with header `y,x1,...,xd`.
pub fn read_training_csv(path: &Path) -> Result<Dataset> {
    let (header, rows) = read_records(path)?;
    if header.first().map(String::as_str) != Some("y") {
        return Err(Error::Parse(format!("{}: first column must be `y`", path.display())));
    }
    if header.len() < 2 {
        return Err(Error::Parse(format!("{}: no covariate columns", path.display())));
    }
    check_x_columns(path, &header[1..])?;
    let d = header.len() - 1;
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r[0]));
    Dataset::new(to_matrix(&rows, 1, d), y)
}

/// Reads a feature CSV with header `x1,...,xd`, optionally preceded by `y`.
pub fn read_feature_csv(path: &Path) -> Result<DMatrix<f64>> {
    let (header, rows) = read_records(path)?;
    if header.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let skip = usize::from(header[0] == "y");
    check_x_columns(path, &header[skip..])?;
    Ok(to_matrix(&rows, skip, header.len() - skip))
}

/// Writes predictions as a `yhat` column with 17 significant digits.
pub fn write_predictions<W: Write>(mut out: W, yhat: &DVector<f64>) -> Result<()> {
    writeln!(out, "yhat")?;
    for v in yhat.iter() {
        writeln!(out, "{}", fmt17(*v))?;
    }
    Ok(())
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn require<T: Clone>(v: &Option<T>, what: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::InvalidParameter(format!("missing {what}")))
}

fn estimator_spec(c: &RunConfig) -> Result<EstimatorSpec> {
    let kind: EstimatorKind = require(&c.estimator.kind, "--estimator")?.parse()?;
    let kernel = match &c.estimator.kernel {
        Some(k) if kind.uses_kernel() => Some(k.parse::<KernelSpec>()?),
        Some(_) => return Err(Error::Incompatible(format!("estimator `{kind}` takes no kernel"))),
        None => None,
    };
    let spec = EstimatorSpec::new(kind, kernel)?;
    Ok(match c.estimator.iterations {
        Some(t) => spec.with_iterations(t),
        None => spec,
    })
}

fn tuning_grid(c: &RunConfig, kind: EstimatorKind) -> Result<TuningGrid> {
    let mut grid = TuningGrid::default();
    if let Some(g) = &c.tuning.lambda_grid {
        grid.lambda_values = parse_grid(g)?;
    }
    if let Some(g) = &c.tuning.mu_grid {
        grid.mu_values = Some(parse_grid(g)?);
    }
    if let Some(g) = &c.tuning.gamma_grid {
        grid.gamma_values = Some(parse_grid(g)?);
    }
    if let Some(k) = c.tuning.folds {
        grid.folds = k;
    }
    if let Some(s) = c.tuning.seed {
        grid.seed = s;
    }
    if !kind.uses_lambda() {
        grid.lambda_values = vec![1.0];
    }
    Ok(grid)
}

fn has_grid(c: &RunConfig) -> bool {
    c.tuning.lambda_grid.is_some() || c.tuning.mu_grid.is_some() || c.tuning.gamma_grid.is_some()
}

fn print_cv_best(out: &mut dyn Write, cv: &CvResult) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), fmt17);
    writeln!(out, "best_lambda={}", opt(cv.best_lambda))?;
    writeln!(out, "best_mu={}", opt(cv.best_mu))?;
    writeln!(out, "best_gamma={}", opt(cv.best_gamma))?;
    writeln!(out, "cv_mse={}", fmt17(cv.best_cv_mse))?;
    Ok(())
}

fn cmd_fit(flags: &RunFlags, out: &mut dyn Write) -> Result<i32> {
    let c = merged_config(flags, "fit")?;
    let data = read_training_csv(&require(&c.data.train, "--data")?)?;
    let model_path = require(&c.output.model, "--model")?;
    let spec = estimator_spec(&c)?;
    let kind = spec.kind;
    let (spec, lambda, mu) = if has_grid(&c) && kind != EstimatorKind::Ols {
        let cv = cross_validate(&data, &spec, &tuning_grid(&c, kind)?)?;
        print_cv_best(out, &cv)?;
        let kernel = cv.tuned_kernel(spec.kernel.as_ref());
        (EstimatorSpec { kernel, ..spec }, cv.best_lambda.unwrap_or(0.0), cv.best_mu.unwrap_or(0.0))
    } else {
        let lambda = if kind.uses_lambda() { require(&c.estimator.lambda, "--lambda")? } else { 0.0 };
        let mu = if kind.uses_mu() { require(&c.estimator.mu, "--mu")? } else { 0.0 };
        (spec, lambda, mu)
    };
    let model = spec.fit(&data, lambda, mu)?;
    model.save(&model_path)?;
    let mse = (&data.y - &model.fitted).norm_squared() / data.n() as f64;
    writeln!(out, "estimator={kind}")?;
    if let Some(k) = &model.kernel {
        writeln!(out, "kernel={k}")?;
    }
    if kind.uses_lambda() {
        writeln!(out, "lambda={}", fmt17(lambda))?;
    }
    if kind.uses_mu() {
        writeln!(out, "mu={}", fmt17(mu))?;
    }
    writeln!(out, "training_mse={}", fmt17(mse))?;
    for w in &model.warnings {
        writeln!(out, "warning={w}")?;
    }
    writeln!(out, "model={}", model_path.display())?;
    Ok(EXIT_OK)
}

fn cmd_predict(flags: &RunFlags, out: &mut dyn Write) -> Result<i32> {
    let c = merged_config(flags, "predict")?;
    let model = FittedModel::load(&require(&c.output.model, "--model")?)?;
    let x = read_feature_csv(&require(&c.data.features, "--data")?)?;
    let yhat = if x.nrows() == 0 { DVector::zeros(0) } else { predict(&model, &x)? };
    match &c.output.predictions {
        Some(p) => {
            let mut buf = Vec::new();
            write_predictions(&mut buf, &yhat)?;
            fs::write(p, buf)?;
        }
        None => write_predictions(out, &yhat)?,
    }
    Ok(EXIT_OK)
}

fn cmd_tune(flags: &RunFlags, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let c = merged_config(flags, "tune")?;
    let data = read_training_csv(&require(&c.data.train, "--data")?)?;
    let spec = estimator_spec(&c)?;
    let cv = cross_validate(&data, &spec, &tuning_grid(&c, spec.kind)?)?;
    match &c.output.cv {
        Some(p) => {
            let mut buf = Vec::new();
            cv.write_csv(&mut buf)?;
            fs::write(p, buf)?;
            print_cv_best(out, &cv)?;
        }
        None => {
            cv.write_csv(&mut *out)?;
            print_cv_best(err, &cv)?;
        }
    }
    Ok(EXIT_OK)
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad eigenvalue `{v}`"))))
        .collect()
}

/// Kernel spectrum from exactly one of `--spectrum`, `--values` or `--data`.
fn theory_spectrum(f: &TheoryFlags, data: Option<&Dataset>) -> Result<EigenSpectrum> {
    let given = [f.spectrum.is_some(), f.values.is_some(), f.data.is_some()].iter().filter(|b| **b).count();
    if given != 1 {
        return Err(Error::InvalidParameter("give exactly one of --spectrum, --values or --data".into()));
    }
    if let Some(s) = &f.spectrum {
        let decay: AnalyticDecay = s.parse()?;
        return Ok(analytic_spectrum(decay, f.length)?.with_n_context(f.n.unwrap_or(1)));
    }
    if let Some(v) = &f.values {
        return EigenSpectrum::from_values(parse_values(v)?, SpectrumSource::Analytic, f.n.unwrap_or(1));
    }
    let data = data.expect("data loaded");
    let kernel: KernelSpec = require(&f.kernel, "--kernel")?.parse()?;
    let k = kernel_matrix(&kernel, &data.x)?.into_inner();
    let s = spectrum(&k, SpectrumSource::EmpiricalK)?;
    Ok(match f.n {
        Some(n) => s.with_n_context(n),
        None => s,
    })
}

fn theory_lambdas(f: &TheoryFlags) -> Result<Vec<f64>> {
    match (&f.lambda, &f.lambda_grid) {
        (Some(l), None) => Ok(vec![*l]),
        (None, Some(g)) => parse_grid(g),
        (None, None) => Ok(log_grid(1e-4, 1.0, 20)),
        (Some(_), Some(_)) => Err(Error::InvalidParameter("give --lambda or --lambda-grid, not both".into())),
    }
}

fn write_or_print(path: &Option<PathBuf>, bytes: Vec<u8>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => out.write_all(&bytes)?,
    }
    Ok(())
}

fn cmd_theory(f: &TheoryFlags, out: &mut dyn Write) -> Result<i32> {
    let data = match &f.data {
        Some(p) => Some(read_training_csv(p)?),
        None => None,
    };
    match f.op.as_str() {
        "critical-radius" => {
            let s = theory_spectrum(f, data.as_ref())?;
            let delta = critical_radius(&s)?;
            let residual = (kernel_complexity(&s, delta)? - delta).abs();
            writeln!(out, "delta={}", fmt17(delta))?;
            writeln!(out, "residual={residual:e}")?;
            writeln!(out, "stat_dim={}", statistical_dimension(&s, delta)?)?;
        }
        "stat-dim" => {
            let s = theory_spectrum(f, data.as_ref())?;
            let delta = require(&f.delta, "--delta")?;
            writeln!(out, "stat_dim={}", statistical_dimension(&s, delta)?)?;
        }
        "variance-trace" | "complexity" | "report" => {
            let s = theory_spectrum(f, data.as_ref())?;
            if f.op == "report" {
                let delta = critical_radius(&s)?;
                writeln!(out, "# delta={}", fmt17(delta))?;
                writeln!(out, "# stat_dim={}", statistical_dimension(&s, delta)?)?;
                writeln!(out, "# source={}", s.source.name())?;
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["lambda", "variance_trace", "kernel_complexity"])?;
            for l in theory_lambdas(f)? {
                w.write_record([
                    format!("{l:e}"),
                    format!("{:e}", variance_trace(&s, l)?),
                    format!("{:e}", kernel_complexity(&s, l)?),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            write_or_print(&f.output, bytes, out)?;
        }
        "bound" => {
            let reports = theory_bounds(f, data.as_ref())?;
            let mut buf = Vec::new();
            BoundReport::write_csv(&reports, &mut buf)?;
            write_or_print(&f.output, buf, out)?;
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown op `{other}` (critical-radius, stat-dim, variance-trace, complexity, report, bound)"
            )))
        }
    }
    Ok(EXIT_OK)
}

fn theory_bounds(f: &TheoryFlags, data: Option<&Dataset>) -> Result<Vec<BoundReport>> {
    let theorem: Theorem = require(&f.theorem, "--theorem")?.parse()?;
    let mu = f.mu.unwrap_or(0.0);
    let mut linear: Option<EigenSpectrum> = None;
    let mut bias = BiasInput::Zero;
    let (kernel_spec, n, d) = match (theorem, data) {
        (Theorem::T3 | Theorem::T5, _) => {
            if f.data.is_some() {
                return Err(Error::Incompatible(format!("{theorem} uses an analytic spectrum, not --data")));
            }
            let s = theory_spectrum(f, None)?;
            if theorem == Theorem::T5 {
                let text = require(&f.linear_spectrum, "--linear-spectrum")?;
                linear = Some(analytic_spectrum(text.parse()?, f.length)?);
            }
            let n = require(&f.n, "--n")?;
            let d = linear.as_ref().map_or(1, |l| l.len());
            (s, n, d)
        }
        (_, Some(data)) => {
            let kernel: KernelSpec = require(&f.kernel, "--kernel")?.parse()?;
            let k = kernel_matrix(&kernel, &data.x)?.into_inner();
            let factor = factor_design(&data.x)?;
            let s = match theorem {
                Theorem::T1 => spectrum(&k, SpectrumSource::EmpiricalK)?,
                Theorem::T2 => spectrum(&factor.project_both_sides(&k), SpectrumSource::EmpiricalQkq)?,
                _ => {
                    let q = factor.q_mu_matrix(mu, false)?;
                    let mut m = &q * &k * &q;
                    crate::design::symmetrize(&mut m);
                    linear = Some(EigenSpectrum::from_values(
                        factor.xtx_eigs().to_vec(),
                        SpectrumSource::EmpiricalSigma,
                        data.n(),
                    )?);
                    spectrum(&m, SpectrumSource::EmpiricalQmuKQmu)?
                }
            };
            if f.bias == "exact" {
                bias = BiasInput::Exact { f_star: data.y.clone(), kernel_matrix: k, x: Some(data.x.clone()) };
            }
            (s, data.n(), factor.rank())
        }
        (th, None) => return Err(Error::Incompatible(format!("{th} needs --data for its empirical spectrum"))),
    };
    match f.bias.as_str() {
        "zero" | "exact" => {}
        other => return Err(Error::InvalidParameter(format!("--bias must be zero or exact, got `{other}`"))),
    }
    if f.bias == "exact" && data.is_none() {
        return Err(Error::Incompatible("exact bias needs --data".into()));
    }
    theory_lambdas(f)?
        .into_iter()
        .map(|lambda| {
            bound_report(&BoundRequest {
                theorem,
                lambda,
                mu,
                sigma2: f.sigma2,
                d,
                n,
                kernel_spectrum: &kernel_spec,
                linear_spectrum: linear.as_ref(),
                bias: bias.clone(),
            })
        })
        .collect()
}

fn cmd_reproduce(f: &ReproduceFlags, out: &mut dyn Write) -> Result<i32> {
    let mut c = match &f.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if f.id.is_some() {
        c.experiment.id.clone_from(&f.id);
    }
    if f.scale.is_some() {
        c.experiment.scale.clone_from(&f.scale);
    }
    if f.seed.is_some() {
        c.experiment.seed = f.seed;
    }
    if let Some(d) = &f.output_dir {
        c.output.dir = Some(d.clone());
    }
    let id = require(&c.experiment.id, "experiment id")?;
    let scale: Scale = c.experiment.scale.as_deref().unwrap_or("desk").parse()?;
    let seed = c.experiment.seed.unwrap_or(0);
    let dir = c.output.dir.clone().unwrap_or_else(|| PathBuf::from("results").join(&id));
    let rep = reproduce(&id, scale, seed)?;
    for path in rep.write_bundle(&dir)? {
        writeln!(out, "wrote {}", path.display())?;
    }
    for chk in &rep.checks {
        writeln!(out, "{} {}: {}", if chk.passed { "PASS" } else { "FAIL" }, chk.name, chk.detail)?;
    }
    Ok(if scale == Scale::Desk && !rep.all_passed() { EXIT_CHECK_FAILED } else { EXIT_OK })
}

fn cmd_config_dump(flags: &RunFlags, out: &mut dyn Write) -> Result<i32> {
    let c = merged_config(flags, "config")?;
    let text = c.to_text()?;
    match &flags.output {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Fit(f) => cmd_fit(f, out),
        Command::Predict(f) => cmd_predict(f, out),
        Command::Tune(f) => cmd_tune(f, out, err),
        Command::Theory(f) => cmd_theory(f, out),
        Command::Reproduce(f) => cmd_reproduce(f, out),
        Command::Config { action: ConfigAction::Dump(f) } => cmd_config_dump(f, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1:100:3").unwrap().len(), 3);
        assert!((parse_grid("1:100:3").unwrap()[1] - 10.0).abs() < 1e-12);
        assert_eq!(parse_grid("0.5, 2").unwrap(), vec![0.5, 2.0]);
        assert!(parse_grid("1:10:0").is_err());
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(RunConfig::parse("[estimator]\nkind = \"akrr\"\n").is_ok());
        assert!(RunConfig::parse("[estimator]\nkinds = \"akrr\"\n").is_err());
        assert!(RunConfig::parse("[extra]\n").is_err());
    }

    #[test]
    fn config_round_trip() {
        let mut c = RunConfig::default();
        c.estimator.kind = Some("akrr_ridge".into());
        c.estimator.lambda = Some(0.25);
        c.tuning.lambda_grid = Some("1e-3:1:5".into());
        c.output.model = Some(PathBuf::from("/tmp/m.txt"));
        let back = RunConfig::parse(&c.to_text().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn seventeen_digits() {
        let v = 0.1f64 + 0.2;
        assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
    }
}
