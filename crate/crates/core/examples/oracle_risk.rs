//! Monte Carlo predictive risk and optimism under a known design, next to
//! the closed form available for Gaussian designs.
//!
//!     cargo run --release --example oracle_risk

use qrisk::dgp::{Dgp, DgpId};
use qrisk::oracle::{closed_form_trace, mc_covariance_form, mc_risk, population_coefficients, McRiskOptions};
use qrisk::ModelSpec;

fn main() -> qrisk::Result<()> {
    let dgp = Dgp::new(DgpId::Dgp1, 8)?;
    let n = 500;
    let opts = McRiskOptions { reps: 1000, eval_samples: 1000, seed: 1 };

    println!("{:<26} {:>10} {:>10} {:>10}", "model", "optimism", "se", "closed");
    for model in [ModelSpec::leading(2), ModelSpec::leading(4), ModelSpec::new((1..=8).collect(), true)?] {
        let o = mc_risk(&dgp, &model, 0.5, n, &opts)?;
        let c = closed_form_trace(&dgp, &model, 0.5, n)?;
        println!("{:<26} {:>10.5} {:>10.5} {:>10.5}", model.to_string(), o.optimism, o.optimism_se, c);
    }

    // The covariance form of the same quantity, around the population fit.
    let model = ModelSpec::leading(4);
    let theta = population_coefficients(&dgp, &model, 0.5, 200_000, 3)?;
    let cov = mc_covariance_form(&dgp, &model, 0.5, n, 400, 4, &theta)?;
    println!("\ncovariance form for {model}: {:.5} (se {:.5})", cov.value, cov.se);

    // Heteroscedastic design: no closed form, the oracle still applies.
    let dgp3 = Dgp::new(DgpId::Dgp3, 4)?;
    let o = mc_risk(&dgp3, &ModelSpec::leading(4), 0.8, n, &opts)?;
    println!("DGP3, tau 0.8: predictive risk {:.4}, optimism {:.5} (se {:.5})", o.pr, o.optimism, o.optimism_se);
    Ok(())
}
