//! Fit linear quantile regressions to simulated data and compare with the
//! true conditional quantile function.
//!
//!     cargo run --example fit_quantile

use qrisk::dgp::{Dgp, DgpId};
use qrisk::num::RngStream;
use qrisk::{fit, ModelSpec, SolverOptions};

fn main() -> qrisk::Result<()> {
    let dgp = Dgp::new(DgpId::Dgp1, 6)?;
    let data = dgp.sample(2000, &RngStream::new(42, 0))?;
    let model = ModelSpec::new(vec![1, 2, 3, 4, 5], true)?;

    for tau in [0.1, 0.5, 0.9] {
        let f = fit(&data, &model, tau, &SolverOptions::default())?;
        // DGP1: Q(tau | x) = x1 + x2 + x3 + x4 + 2 q_tau
        let intercept = dgp.scale(&[0.0; 6]) * dgp.noise_quantile(tau)?;
        println!("tau = {tau}: {} interior-point iterations, gap {:.1e}", f.iterations, f.duality_gap);
        for (name, (est, truth)) in
            model.column_names().iter().zip(f.theta.iter().zip([intercept, 1.0, 1.0, 1.0, 1.0, 0.0]))
        {
            println!("  {name:>9} {est:>8.4}  (true {truth:.4})");
        }
    }

    // Polishing snaps to an exact basic solution: at least k residuals are 0.
    let opts = SolverOptions { polish: true, ..Default::default() };
    let f = fit(&data, &model, 0.5, &opts)?;
    let zeros = f.residuals.iter().filter(|r| r.abs() < 1e-9).count();
    println!("polished median fit interpolates {zeros} of {} points", data.n());
    Ok(())
}
