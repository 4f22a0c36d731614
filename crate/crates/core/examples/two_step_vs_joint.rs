//! Joint additive fit against the two-step fit and backfitting iterations.

use akrrlab::estimators::{fit_akrr, fit_iterated, fit_two_step};
use akrrlab::kernels::KernelSpec;
use akrrlab::simulation::{generate, DgpSpec};

fn main() -> akrrlab::Result<()> {
    let sim = generate(&DgpSpec::highdim(20, 0.9, 6.0, 2.0, 5), 400, true)?;
    let data = &sim.data;
    let kernel = KernelSpec::gaussian(20.0)?;
    let lambda = 1e-3;
    let risk = |fitted: &nalgebra::DVector<f64>| (fitted - &sim.signal).norm_squared() / data.n() as f64;

    let joint = fit_akrr(data, &kernel, lambda)?;
    let two = fit_two_step(data, &kernel, lambda)?;
    println!("joint     in-sample risk {:.5}", risk(&joint.fitted));
    println!("two-step  in-sample risk {:.5}", risk(&two.fitted));
    for t in [1, 2, 5, 20, 100] {
        let m = fit_iterated(data, &kernel, lambda, t)?;
        let gap = (&m.fitted - &joint.fitted).norm() / data.y.norm();
        println!("backfit T={t:<3} ran {:>3} risk {:.5} gap to joint {gap:.2e}", m.iterations, risk(&m.fitted));
    }
    Ok(())
}
