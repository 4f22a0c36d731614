//! Joint selection of lambda and the Gaussian bandwidth by k-fold CV.

use akrrlab::estimators::{EstimatorKind, EstimatorSpec};
use akrrlab::kernels::KernelSpec;
use akrrlab::model_selection::{cross_validate, log_grid, median_bandwidth, TuningGrid};
use akrrlab::simulation::{generate, DgpSpec};

fn main() -> akrrlab::Result<()> {
    let sim = generate(&DgpSpec::gaussian3d(1.0, 11), 300, true)?;
    println!("median-heuristic gamma = {:.4}", median_bandwidth(&sim.data.x)?);
    let grid = TuningGrid::default().with_gammas(log_grid(0.1, 150.0, 6)).with_seed(11);
    for kind in [EstimatorKind::Krr, EstimatorKind::Akrr] {
        let spec = EstimatorSpec::new(kind, Some(KernelSpec::gaussian(1.0)?))?;
        let cv = cross_validate(&sim.data, &spec, &grid)?;
        println!(
            "{kind:5} best lambda={:.3e} gamma={:.3} cv mse={:.4} ({} grid points)",
            cv.best_lambda.unwrap(),
            cv.best_gamma.unwrap(),
            cv.best_cv_mse,
            cv.cv_curve.len()
        );
    }
    Ok(())
}
