//! K-fold cross-validation over `lambda`, `mu` and the Gaussian bandwidth,
//! plus the median-distance bandwidth heuristic.
//!
//! Each `(gamma, mu, fold)` cell costs one symmetric eigendecomposition; every
//! `lambda` on the grid is then read off the spectrum in `O(n^2)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::design::{factor_design, symmetric_eigen, DesignFactor};
use crate::error::{Error, Result};
use crate::estimators::{Dataset, EstimatorKind, EstimatorSpec, ITERATION_TOLERANCE};
use crate::kernels::{gram_matrix, KernelSpec};

/// `count` points equally spaced on the log scale between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid {
    pub lambda_values: Vec<f64>,
    pub mu_values: Option<Vec<f64>>,
    pub gamma_values: Option<Vec<f64>>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid { lambda_values: log_grid(1e-6, 1e4, 50), mu_values: None, gamma_values: None, folds: 5, seed: 0 }
    }
}

impl TuningGrid {
    pub fn with_lambdas(mut self, values: Vec<f64>) -> Self {
        self.lambda_values = values;
        self
    }

    pub fn with_mus(mut self, values: Vec<f64>) -> Self {
        self.mu_values = Some(values);
        self
    }

    pub fn with_gammas(mut self, values: Vec<f64>) -> Self {
        self.gamma_values = Some(values);
        self
    }

    pub fn with_folds(mut self, folds: usize) -> Self {
        self.folds = folds;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, spec: &EstimatorSpec, n: usize) -> Result<()> {
        let kind = spec.kind;
        if kind == EstimatorKind::Ols {
            return Err(Error::Incompatible("ols has no tuning parameters".into()));
        }
        if self.folds < 2 || self.folds > n {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= folds <= n, got folds = {} with n = {n}",
                self.folds
            )));
        }
        if kind.uses_lambda() {
            if self.lambda_values.is_empty() {
                return Err(Error::InvalidParameter("lambda grid is empty".into()));
            }
            if self.lambda_values.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
                return Err(Error::InvalidParameter("lambda grid values must be positive".into()));
            }
        }
        match (&self.mu_values, kind.uses_mu()) {
            (Some(_), false) => return Err(Error::Incompatible(format!("estimator `{kind}` does not take a mu grid"))),
            (None, true) => return Err(Error::Incompatible(format!("estimator `{kind}` needs a mu grid"))),
            (Some(mus), true) => {
                if mus.is_empty() || mus.iter().any(|&m| !(m.is_finite() && m >= 0.0)) {
                    return Err(Error::InvalidParameter("mu grid must be non-empty and nonnegative".into()));
                }
                if kind == EstimatorKind::LinearRidge && mus.contains(&0.0) {
                    return Err(Error::InvalidParameter("linear ridge requires mu > 0".into()));
                }
            }
            (None, false) => {}
        }
        if let Some(gammas) = &self.gamma_values {
            match &spec.kernel {
                Some(k) if k.is_gaussian() => {}
                Some(_) => return Err(Error::Incompatible("gamma grid requires a Gaussian kernel".into())),
                None => return Err(Error::Incompatible(format!("estimator `{kind}` has no kernel to tune"))),
            }
            if gammas.is_empty() || gammas.iter().any(|&g| !(g.is_finite() && g > 0.0)) {
                return Err(Error::InvalidParameter("gamma grid must be non-empty and positive".into()));
            }
        }
        Ok(())
    }
}

/// One evaluated grid point. Absent coordinates were not tuned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub cv_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_lambda: Option<f64>,
    pub best_mu: Option<f64>,
    pub best_gamma: Option<f64>,
    pub best_cv_mse: f64,
    pub cv_curve: Vec<GridPoint>,
    pub fold_assignment: Vec<usize>,
}

impl CvResult {
    /// The estimator's kernel with the selected bandwidth substituted.
    pub fn tuned_kernel(&self, base: Option<&KernelSpec>) -> Option<KernelSpec> {
        match (base, self.best_gamma) {
            (Some(KernelSpec::Gaussian { .. }), Some(gamma)) => Some(KernelSpec::Gaussian { gamma }),
            (base, _) => base.cloned(),
        }
    }

    /// CSV with columns `lambda,mu,gamma,cv_mse`; untuned coordinates are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "mu", "gamma", "cv_mse"])?;
        let cell = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
        for p in &self.cv_curve {
            w.write_record([cell(p.lambda), cell(p.mu), cell(p.gamma), format!("{:e}", p.cv_mse)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seeded shuffle of `0..n` cut into `k` contiguous blocks whose sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (base, extra) = (n / k, n % k);
    let mut folds = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[pos..pos + size] {
            folds[i] = f;
        }
        pos += size;
    }
    folds
}

/// Held-out pieces of one fold, shared by every grid point.
struct Fold {
    train: Vec<usize>,
    test: Vec<usize>,
    y_train: DVector<f64>,
    y_test: DVector<f64>,
    x_train: DMatrix<f64>,
    x_test: DMatrix<f64>,
    factor: Option<DesignFactor>,
}

enum Linear {
    Zero,
    Fixed(DVector<f64>),
    Pinv,
    Ridge(f64),
}

/// Spectral form of one fit: `c(lambda) = B diag(1/(values + lambda)) z`.
struct Path<'a> {
    fold: &'a Fold,
    k_train: DMatrix<f64>,
    k_cross: DMatrix<f64>,
    basis: DMatrix<f64>,
    values: Vec<f64>,
    z: DVector<f64>,
    linear: Linear,
    /// Eigenvectors of `K` itself, kept for the backfitting path.
    iterate: Option<(DMatrix<f64>, usize)>,
}

impl Path<'_> {
    fn dual(&self, lambda: f64, z: &DVector<f64>) -> DVector<f64> {
        let scaled = DVector::from_iterator(z.len(), z.iter().zip(&self.values).map(|(zi, v)| zi / (v + lambda)));
        &self.basis * scaled
    }

    fn held_out_mse(&self, lambda: f64) -> Result<f64> {
        let fold = self.fold;
        let (alpha, c) = match &self.iterate {
            Some((w, max_iter)) => self.backfit(w, *max_iter, lambda)?,
            None => {
                let c = self.dual(lambda, &self.z);
                let alpha = match &self.linear {
                    Linear::Zero => None,
                    Linear::Fixed(a) => Some(a.clone()),
                    Linear::Pinv => {
                        let r = &fold.y_train - &self.k_train * &c;
                        Some(fold.factor.as_ref().expect("factored").ols_coefficients(&r)?)
                    }
                    Linear::Ridge(mu) => {
                        let r = &fold.y_train - &self.k_train * &c;
                        Some(fold.factor.as_ref().expect("factored").ridge_coefficients(*mu, &r)?)
                    }
                };
                (alpha, c)
            }
        };
        let mut pred = &self.k_cross * c;
        if let Some(a) = alpha {
            pred += &fold.x_test * a;
        }
        Ok((pred - &fold.y_test).norm_squared() / fold.test.len() as f64)
    }

    fn backfit(&self, w: &DMatrix<f64>, max_iter: usize, lambda: f64) -> Result<(Option<DVector<f64>>, DVector<f64>)> {
        let fold = self.fold;
        let factor = fold.factor.as_ref().expect("factored");
        let y = &fold.y_train;
        let tol = ITERATION_TOLERANCE * y.norm();
        let mut g = DVector::zeros(y.len());
        let mut prev: Option<DVector<f64>> = None;
        let mut alpha = DVector::zeros(fold.x_train.ncols());
        let mut c = DVector::zeros(y.len());
        for _ in 0..max_iter {
            alpha = factor.ols_coefficients(&(y - &g))?;
            let r = y - &fold.x_train * &alpha;
            c = self.dual(lambda, &w.tr_mul(&r));
            g = &self.k_train * &c;
            let fit = &fold.x_train * &alpha + &g;
            if prev.as_ref().is_some_and(|p| (&fit - p).norm() < tol) {
                break;
            }
            prev = Some(fit);
        }
        Ok((Some(alpha), c))
    }
}

fn build_path<'a>(
    kind: EstimatorKind,
    fold: &'a Fold,
    gram: &DMatrix<f64>,
    mu: Option<f64>,
    iterations: usize,
) -> Result<Path<'a>> {
    let ntr = fold.train.len() as f64;
    let k_train = gram.select_rows(&fold.train).select_columns(&fold.train) / ntr;
    let k_cross = gram.select_rows(&fold.test).select_columns(&fold.train) / ntr;
    let y = &fold.y_train;
    let factor = || fold.factor.as_ref().expect("factored");

    let mu = mu.unwrap_or(0.0);
    let (system, basis_map, rhs, linear): System = match kind {
        EstimatorKind::Krr | EstimatorKind::Iterated => (k_train.clone(), None, y.clone(), Linear::Zero),
        EstimatorKind::TwoStep => {
            let f = factor();
            (k_train.clone(), None, f.apply_q_x(y)?, Linear::Fixed(f.ols_coefficients(y)?))
        }
        EstimatorKind::Akrr => akrr_system(factor(), &k_train, y)?,
        EstimatorKind::AkrrRidge if mu == 0.0 => akrr_system(factor(), &k_train, y)?,
        EstimatorKind::AkrrRidge => {
            let f = factor();
            let w = f.q_mu_weights(mu, true);
            (f.sandwich(&k_train, &w), Some(w), f.apply_q_mu(mu, y, true)?, Linear::Ridge(mu))
        }
        EstimatorKind::Ols | EstimatorKind::LinearRidge => unreachable!("linear kinds have no kernel path"),
    };
    let eig = symmetric_eigen(&system)?;
    let z = eig.vectors.tr_mul(&rhs);
    let basis = match basis_map {
        Some(w) => factor().shrink_columns(&w, &eig.vectors),
        None => eig.vectors.clone(),
    };
    let iterate = (kind == EstimatorKind::Iterated).then_some((eig.vectors, iterations));
    Ok(Path { fold, k_train, k_cross, basis, values: eig.values, z, linear, iterate })
}

type System = (DMatrix<f64>, Option<Vec<f64>>, DVector<f64>, Linear);

fn akrr_system(f: &DesignFactor, k: &DMatrix<f64>, y: &DVector<f64>) -> Result<System> {
    let ones = vec![1.0; f.rank()];
    Ok((f.sandwich(k, &ones), Some(ones), f.apply_q_x(y)?, Linear::Pinv))
}

fn make_folds(data: &Dataset, assignment: &[usize], k: usize, need_factor: bool) -> Result<Vec<Fold>> {
    (0..k)
        .map(|f| {
            let train: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] == f).collect();
            let tr = data.subset(&train);
            let te = data.subset(&test);
            let factor = if need_factor { Some(factor_design(&tr.x)?) } else { None };
            Ok(Fold { train, test, y_train: tr.y, y_test: te.y, x_train: tr.x, x_test: te.x, factor })
        })
        .collect()
}

/// Index of the best point: minimal error, ties (within a relative `1e-9`
/// plus a tiny absolute floor) broken toward larger lambda, then mu, then gamma.
fn select_best(curve: &[GridPoint], floor: f64) -> usize {
    let min = curve.iter().map(|p| p.cv_mse).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * min.abs() + floor;
    let key = |p: &GridPoint| [p.lambda, p.mu, p.gamma].map(|v| v.unwrap_or(0.0));
    let mut best: Option<usize> = None;
    for (i, p) in curve.iter().enumerate() {
        if p.cv_mse > min + tol {
            continue;
        }
        best = match best {
            Some(b) if key(&curve[b]).partial_cmp(&key(p)) != Some(std::cmp::Ordering::Less) => Some(b),
            _ => Some(i),
        };
    }
    best.expect("non-empty curve")
}

/// Cartesian grid search by k-fold cross-validation. Deterministic given the
/// data, estimator and grid (including its seed).
pub fn cross_validate(data: &Dataset, spec: &EstimatorSpec, grid: &TuningGrid) -> Result<CvResult> {
    grid.validate(spec, data.n())?;
    let kind = spec.kind;
    let assignment = fold_assignment(data.n(), grid.folds, grid.seed);
    let folds = make_folds(data, &assignment, grid.folds, kind.has_linear_part())?;

    let mut curve = Vec::new();
    if kind == EstimatorKind::LinearRidge {
        for &mu in grid.mu_values.as_deref().unwrap_or(&[]) {
            let mut total = 0.0;
            for fold in &folds {
                let alpha = fold.factor.as_ref().expect("factored").ridge_coefficients(mu, &fold.y_train)?;
                total += (&fold.x_test * alpha - &fold.y_test).norm_squared() / fold.test.len() as f64;
            }
            curve.push(GridPoint { lambda: None, mu: Some(mu), gamma: None, cv_mse: total / folds.len() as f64 });
        }
    } else {
        let base = spec.kernel.expect("validated kernel");
        let kernels: Vec<(Option<f64>, KernelSpec)> = match &grid.gamma_values {
            Some(gammas) => gammas.iter().map(|&g| (Some(g), KernelSpec::Gaussian { gamma: g })).collect(),
            None => vec![(None, base)],
        };
        let mus: Vec<Option<f64>> = match &grid.mu_values {
            Some(m) => m.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let cells: Vec<(usize, Option<f64>)> =
            (0..kernels.len()).flat_map(|g| mus.iter().map(move |&m| (g, m))).collect();
        let grams = kernels.par_iter().map(|(_, k)| gram_matrix(k, &data.x)).collect::<Result<Vec<_>>>()?;
        let blocks = cells
            .par_iter()
            .map(|&(g, mu)| -> Result<Vec<GridPoint>> {
                let mut totals = vec![0.0; grid.lambda_values.len()];
                for fold in &folds {
                    let path = build_path(kind, fold, &grams[g], mu, spec.iterations)?;
                    for (t, &lambda) in totals.iter_mut().zip(&grid.lambda_values) {
                        *t += path.held_out_mse(lambda)?;
                    }
                }
                Ok(grid
                    .lambda_values
                    .iter()
                    .zip(totals)
                    .map(|(&lambda, t)| GridPoint {
                        lambda: Some(lambda),
                        mu,
                        gamma: kernels[g].0,
                        cv_mse: t / folds.len() as f64,
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        curve = blocks.into_iter().flatten().collect();
    }

    if curve.iter().any(|p| !p.cv_mse.is_finite()) {
        return Err(Error::NonFinite("cross-validation error"));
    }
    let floor = 1e-20 * data.y.norm_squared() / data.n() as f64;
    let best = curve[select_best(&curve, floor)];
    Ok(CvResult {
        best_lambda: best.lambda,
        best_mu: best.mu,
        best_gamma: best.gamma,
        best_cv_mse: best.cv_mse,
        cv_curve: curve,
        fold_assignment: assignment,
    })
}

/// `0.2 m^2` where `m` is the lower median of all pairwise Euclidean distances.
pub fn median_bandwidth(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter("median bandwidth needs at least two points".into()));
    }
    let mut sq = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in 0..i {
            sq.push((x.row(i) - x.row(j)).norm_squared());
        }
    }
    let mid = (sq.len() - 1) / 2;
    let (_, &mut m2, _) = sq.select_nth_unstable_by(mid, f64::total_cmp);
    if !(m2 > 0.0) {
        return Err(Error::InvalidParameter("median pairwise distance is zero".into()));
    }
    Ok(0.2 * m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit, predict, FitParams};
    use rand::Rng;

    fn data(seed: u64, n: usize, d: usize) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(n, |i, _| x[(i, 0)] + (2.0f64 * x[(i, 0)]).cos() + rng.gen_range(-0.2..0.2));
        Dataset::new(x, y).unwrap()
    }

    fn naive_curve(data: &Dataset, spec: &EstimatorSpec, grid: &TuningGrid) -> Vec<f64> {
        let folds = fold_assignment(data.n(), grid.folds, grid.seed);
        let mut out = Vec::new();
        let gammas: Vec<Option<f64>> =
            grid.gamma_values.clone().map_or(vec![None], |g| g.into_iter().map(Some).collect());
        let mus: Vec<f64> = grid.mu_values.clone().unwrap_or(vec![0.0]);
        for gamma in &gammas {
            let kernel = match gamma {
                Some(g) => Some(KernelSpec::Gaussian { gamma: *g }),
                None => spec.kernel,
            };
            for &mu in &mus {
                for &lambda in &grid.lambda_values {
                    let mut total = 0.0;
                    for f in 0..grid.folds {
                        let tr: Vec<usize> = (0..data.n()).filter(|&i| folds[i] != f).collect();
                        let te: Vec<usize> = (0..data.n()).filter(|&i| folds[i] == f).collect();
                        let params = FitParams { lambda, mu, iterations: spec.iterations };
                        let m = fit(spec.kind, &data.subset(&tr), kernel.as_ref(), params).unwrap();
                        let test = data.subset(&te);
                        total += (predict(&m, &test.x).unwrap() - test.y).norm_squared() / te.len() as f64;
                    }
                    out.push(total / grid.folds as f64);
                }
            }
        }
        out
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-6, 1e4, 50);
        assert_eq!(g.len(), 50);
        assert!((g[0] - 1e-6).abs() < 1e-18 && (g[49] - 1e4).abs() < 1e-8);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_grid(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn folds_partition_indices() {
        for (n, k) in [(10, 3), (30, 5), (7, 7), (101, 5)] {
            let f = fold_assignment(n, k, 42);
            let mut sizes = vec![0usize; k];
            for &a in &f {
                sizes[a] += 1;
            }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1);
            assert_eq!(sizes.iter().sum::<usize>(), n);
        }
        assert_eq!(fold_assignment(20, 4, 1), fold_assignment(20, 4, 1));
    }

    #[test]
    fn spectral_path_matches_refits() {
        let d = data(1, 30, 1);
        let spline = KernelSpec::spline(2.0, 200).unwrap();
        let grid = TuningGrid::default().with_lambdas(vec![1e-3, 1e-2, 1e-1]).with_seed(3);
        for kind in [EstimatorKind::Krr, EstimatorKind::Akrr, EstimatorKind::TwoStep, EstimatorKind::Iterated] {
            let spec = EstimatorSpec::new(kind, Some(spline)).unwrap().with_iterations(5);
            let cv = cross_validate(&d, &spec, &grid).unwrap();
            let naive = naive_curve(&d, &spec, &grid);
            for (p, q) in cv.cv_curve.iter().zip(&naive) {
                assert!((p.cv_mse - q).abs() <= 1e-10 * q, "{kind}: {} vs {q}", p.cv_mse);
            }
        }
        let spec = EstimatorSpec::new(EstimatorKind::AkrrRidge, Some(KernelSpec::gaussian(1.0).unwrap())).unwrap();
        let grid = grid.with_mus(vec![0.0, 0.05, 1.0]).with_gammas(vec![0.5, 2.0]);
        let d2 = data(2, 25, 2);
        let cv = cross_validate(&d2, &spec, &grid).unwrap();
        let naive = naive_curve(&d2, &spec, &grid);
        assert_eq!(cv.cv_curve.len(), 18);
        for (p, q) in cv.cv_curve.iter().zip(&naive) {
            assert!((p.cv_mse - q).abs() <= 1e-10 * q);
        }
    }

    #[test]
    fn linear_ridge_tunes_mu() {
        let d = data(3, 20, 2);
        let spec = EstimatorSpec::new(EstimatorKind::LinearRidge, None).unwrap();
        let grid = TuningGrid::default().with_mus(vec![1e-3, 1e-1, 10.0]).with_folds(4);
        let cv = cross_validate(&d, &spec, &grid).unwrap();
        assert_eq!(cv.cv_curve.len(), 3);
        assert!(cv.best_lambda.is_none() && cv.best_mu.is_some());
        let naive = naive_curve(&d, &spec, &TuningGrid { lambda_values: vec![0.0], ..grid });
        for (p, q) in cv.cv_curve.iter().zip(&naive) {
            assert!((p.cv_mse - q).abs() <= 1e-12 * q);
        }
    }

    #[test]
    fn linear_signal_ties_go_to_larger_lambda() {
        let d = data(4, 20, 2);
        let y = &d.x * DVector::from_vec(vec![1.0, -2.0]);
        let lin = Dataset::new(d.x.clone(), y).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::Akrr, Some(KernelSpec::gaussian(1.0).unwrap())).unwrap();
        let cv = cross_validate(&lin, &spec, &TuningGrid::default().with_lambdas(vec![1e-3, 1e3])).unwrap();
        assert_eq!(cv.best_lambda, Some(1e3));
    }

    #[test]
    fn single_point_grid() {
        let d = data(5, 15, 1);
        let spec = EstimatorSpec::new(EstimatorKind::Krr, Some(KernelSpec::gaussian(1.0).unwrap())).unwrap();
        let cv = cross_validate(&d, &spec, &TuningGrid::default().with_lambdas(vec![0.1])).unwrap();
        assert_eq!(cv.best_lambda, Some(0.1));
        assert_eq!(cv.best_cv_mse, cv.cv_curve[0].cv_mse);
    }

    #[test]
    fn tie_break_order() {
        let p = |l: f64, m: f64, g: f64, e: f64| GridPoint { lambda: Some(l), mu: Some(m), gamma: Some(g), cv_mse: e };
        let curve = [p(1.0, 2.0, 3.0, 1.0), p(1.0, 5.0, 1.0, 1.0), p(1.0, 5.0, 2.0, 1.0), p(9.0, 0.0, 0.0, 2.0)];
        assert_eq!(select_best(&curve, 0.0), 2);
    }

    #[test]
    fn incompatible_grids() {
        let d = data(6, 10, 1);
        let gauss = KernelSpec::gaussian(1.0).unwrap();
        let krr = EstimatorSpec::new(EstimatorKind::Krr, Some(gauss)).unwrap();
        let with_mu = TuningGrid::default().with_mus(vec![0.1]);
        assert!(matches!(cross_validate(&d, &krr, &with_mu), Err(Error::Incompatible(_))));
        let spline = EstimatorSpec::new(EstimatorKind::Krr, Some(KernelSpec::spline(2.0, 50).unwrap())).unwrap();
        let with_gamma = TuningGrid::default().with_gammas(vec![0.1]);
        assert!(matches!(cross_validate(&d, &spline, &with_gamma), Err(Error::Incompatible(_))));
        let ols = EstimatorSpec::new(EstimatorKind::Ols, None).unwrap();
        assert!(cross_validate(&d, &ols, &TuningGrid::default()).is_err());
        let ridge = EstimatorSpec::new(EstimatorKind::AkrrRidge, Some(gauss)).unwrap();
        assert!(cross_validate(&d, &ridge, &TuningGrid::default()).is_err());
        assert!(cross_validate(&d, &krr, &TuningGrid::default().with_folds(11)).is_err());
        assert!(cross_validate(&d, &krr, &TuningGrid::default().with_folds(1)).is_err());
    }

    #[test]
    fn csv_export() {
        let d = data(7, 12, 1);
        let spec = EstimatorSpec::new(EstimatorKind::Krr, Some(KernelSpec::gaussian(1.0).unwrap())).unwrap();
        let cv = cross_validate(&d, &spec, &TuningGrid::default().with_lambdas(vec![0.1, 1.0]).with_folds(3)).unwrap();
        let mut buf = Vec::new();
        cv.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "lambda,mu,gamma,cv_mse");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1e-1,,,"));
    }

    #[test]
    fn median_bandwidth_examples() {
        let line = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 3.0]);
        assert!((median_bandwidth(&line).unwrap() - 0.8).abs() < 1e-15);
        let two = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        assert!((median_bandwidth(&two).unwrap() - 5.0).abs() < 1e-14);
        assert!(median_bandwidth(&DMatrix::zeros(4, 2)).is_err());
        assert!(median_bandwidth(&DMatrix::zeros(1, 2)).is_err());

        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x = DMatrix::from_fn(50, 3, |_, _| rng.gen_range(-2.0..2.0));
        let mut all = Vec::new();
        for i in 0..50 {
            for j in (i + 1)..50 {
                let d: f64 = (0..3)
                    .map(|k| {
                        let v: f64 = x[(i, k)] - x[(j, k)];
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt();
                all.push(d);
            }
        }
        all.sort_by(f64::total_cmp);
        let m = all[(all.len() - 1) / 2];
        let got = median_bandwidth(&x).unwrap();
        assert!((got - 0.2 * m * m).abs() <= 1e-14 * got);
    }
}
