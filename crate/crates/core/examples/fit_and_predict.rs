//! Fit the additive estimator on a partly linear signal and predict on new points.

use akrrlab::estimators::{fit_akrr, fit_krr, fit_ols, predict, Dataset};
use akrrlab::kernels::KernelSpec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() -> akrrlab::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let f = |x: f64| 3.0 * x + (2.0 * std::f64::consts::PI * x).sin();
    let x = DMatrix::from_fn(200, 1, |_, _| rng.gen::<f64>());
    let y = DVector::from_fn(200, |i, _| f(x[(i, 0)]) + 0.5 * rng.gen_range(-1.0..1.0));
    let data = Dataset::new(x, y)?;
    let kernel = KernelSpec::spline(2.0, 200)?;

    let grid = DMatrix::from_fn(11, 1, |i, _| i as f64 / 10.0);
    let truth = DVector::from_fn(11, |i, _| f(grid[(i, 0)]));
    for (name, model) in
        [("ols", fit_ols(&data)?), ("krr", fit_krr(&data, &kernel, 1e-3)?), ("akrr", fit_akrr(&data, &kernel, 1e-3)?)]
    {
        let yhat = predict(&model, &grid)?;
        let err = (yhat - &truth).norm_squared() / 11.0;
        println!("{name:5} alpha={:>8.4} grid mse={err:.5}", model.alpha.get(0).copied().unwrap_or(0.0));
    }
    Ok(())
}
