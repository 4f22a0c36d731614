//! Critical radii, statistical dimensions and the fixed-design bounds for KRR and the additive fit.

use akrrlab::design::factor_design;
use akrrlab::kernels::{kernel_matrix, KernelSpec};
use akrrlab::simulation::{generate, DgpSpec};
use akrrlab::theory::{
    analytic_spectrum, bound_report, critical_radius, spectrum, statistical_dimension, AnalyticDecay, BiasInput,
    BoundRequest, SpectrumSource, Theorem,
};

fn main() -> akrrlab::Result<()> {
    for n in [100usize, 1000, 10000] {
        let poly = analytic_spectrum(AnalyticDecay::Polynomial { beta: 1.0 }, 100_000)?.with_n_context(n);
        let delta = critical_radius(&poly)?;
        println!(
            "n={n:>6} delta={delta:.3e} n^(-2/3)={:.3e} d(delta)={}",
            (n as f64).powf(-2.0 / 3.0),
            statistical_dimension(&poly, delta)?
        );
    }

    let sim = generate(&DgpSpec::spline1d(1.5, 4), 200, false)?;
    let k = kernel_matrix(&KernelSpec::spline(1.0, 200)?, &sim.data.x)?.into_inner();
    let factor = factor_design(&sim.data.x)?;
    let mu = spectrum(&k, SpectrumSource::EmpiricalK)?;
    let nu = spectrum(&factor.project_both_sides(&k), SpectrumSource::EmpiricalQkq)?;
    println!("{:>9} {:>10} {:>10}", "lambda", "T1 (krr)", "T2 (akrr)");
    for lambda in [1e-4, 1e-3, 1e-2, 1e-1] {
        let req = |theorem, spec| BoundRequest {
            theorem,
            lambda,
            mu: 0.0,
            sigma2: 2.25,
            d: 1,
            n: 200,
            kernel_spectrum: spec,
            linear_spectrum: None,
            bias: BiasInput::Exact {
                f_star: sim.signal.clone(),
                kernel_matrix: k.clone(),
                x: Some(sim.data.x.clone()),
            },
        };
        let t1 = bound_report(&req(Theorem::T1, &mu))?;
        let t2 = bound_report(&req(Theorem::T2, &nu))?;
        println!("{lambda:>9.0e} {:>10.5} {:>10.5}", t1.total, t2.total);
    }
    Ok(())
}
