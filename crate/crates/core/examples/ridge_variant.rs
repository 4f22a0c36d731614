//! The ridge-penalized additive fit interpolates between KRR and linear ridge.

use akrrlab::estimators::{fit_akrr_ridge, fit_krr, fit_linear_ridge, Dataset};
use akrrlab::kernels::KernelSpec;
use akrrlab::simulation::{generate, DgpSpec};

fn main() -> akrrlab::Result<()> {
    let sim = generate(&DgpSpec::highdim(20, 0.9, 6.0, 1.0, 3), 300, true)?;
    let data: &Dataset = &sim.data;
    let kernel = KernelSpec::gaussian(20.0)?;
    let lambda = 1e-2;
    let krr = fit_krr(data, &kernel, lambda)?;
    println!("{:>8} {:>12} {:>12} {:>12}", "mu", "|alpha|", "to krr", "in-sample");
    for mu in [1e-4, 1e-2, 1.0, 1e2, 1e6] {
        let m = fit_akrr_ridge(data, &kernel, lambda, mu)?;
        let gap = (&m.fitted - &krr.fitted).norm() / data.y.norm();
        let risk = (&m.fitted - &sim.signal).norm_squared() / data.n() as f64;
        println!("{mu:>8.0e} {:>12.4} {gap:>12.2e} {risk:>12.5}", m.alpha.norm());
    }
    let lr = fit_linear_ridge(data, 1.0)?;
    println!("linear ridge (mu=1) in-sample: {:.5}", (&lr.fitted - &sim.signal).norm_squared() / data.n() as f64);
    Ok(())
}
