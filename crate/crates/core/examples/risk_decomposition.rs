//! Exact bias and variance of the fixed-design fits against a Monte-Carlo estimate.

use akrrlab::estimators::{fit_akrr, fit_krr, Dataset};
use akrrlab::kernels::{kernel_matrix, KernelSpec};
use akrrlab::simulation::{generate, mean_and_se, DgpSpec};
use akrrlab::theory::{exact_risk_akrr, exact_risk_krr};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

fn main() -> akrrlab::Result<()> {
    let (n, sigma, lambda) = (50, 1.5, 0.01);
    let sim = generate(&DgpSpec::spline1d(1.0, 9), n, false)?;
    let kernel = KernelSpec::spline(1.0, 200)?;
    let k = kernel_matrix(&kernel, &sim.data.x)?.into_inner();
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for name in ["krr", "akrr"] {
        let exact = if name == "krr" {
            exact_risk_krr(&k, &sim.signal, lambda, sigma * sigma)?
        } else {
            exact_risk_akrr(&k, &sim.data.x, &sim.signal, lambda, sigma * sigma)?
        };
        let mut risks = Vec::new();
        for _ in 0..1000 {
            let y = DVector::from_fn(n, |i, _| sim.signal[i] + noise.sample(&mut rng));
            let data = Dataset::new(sim.data.x.clone(), y)?;
            let m = if name == "krr" { fit_krr(&data, &kernel, lambda)? } else { fit_akrr(&data, &kernel, lambda)? };
            risks.push((m.fitted - &sim.signal).norm_squared() / n as f64);
        }
        let (mean, se) = mean_and_se(&risks);
        println!(
            "{name:4} bias={:.5} variance={:.5} total={:.5} monte carlo={mean:.5} (se {se:.5})",
            exact.bias,
            exact.variance,
            exact.total()
        );
    }
    Ok(())
}
