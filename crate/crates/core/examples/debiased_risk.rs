//! In-sample risk is optimistic. Adding the trace-form optimism estimate
//! gives a de-biased predictive risk that can be compared across models.
//!
//!     cargo run --release --example debiased_risk

use qrisk::dgp::{Dgp, DgpId};
use qrisk::num::RngStream;
use qrisk::optimism::{debiased_risk, optimism_estimate};
use qrisk::{fit, ModelSpec, SolverOptions};

fn main() -> qrisk::Result<()> {
    let dgp = Dgp::new(DgpId::Dgp1, 30)?;
    let data = dgp.sample(500, &RngStream::new(7, 0))?;
    let tau = 0.5;

    println!("{:<28} {:>10} {:>10} {:>10} {:>8}", "model", "in-sample", "b_hat", "de-biased", "h");
    for model in [
        ModelSpec::intercept_only(),
        ModelSpec::leading(2),
        ModelSpec::leading(4),
        ModelSpec::new((1..=14).collect(), true)?,
        ModelSpec::new((1..=30).collect(), true)?,
    ] {
        let f = fit(&data, &model, tau, &SolverOptions::default())?;
        let r = debiased_risk(&data, &model, &f, None)?;
        let label = if model.size() > 4 { format!("intercept+z1..z{}", model.size()) } else { model.to_string() };
        println!("{label:<28} {:>10.5} {:>10.5} {:>10.5} {:>8.3}", r.in_sample, r.b_hat, r.pr_debiased, r.bandwidth);
    }

    // The pieces: D0 (density weighted) and D1 (score weighted) Gram matrices.
    let m = ModelSpec::leading(4);
    let f = fit(&data, &m, tau, &SolverOptions::default())?;
    let est = optimism_estimate(&data, &m, &f, None)?;
    println!(
        "\ncorrect model: tr(D0^-1 D1) = {:.3}, b_hat = {:.5}, D0 eigenvalues in [{:.3}, {:.3}]",
        est.trace, est.b_hat, est.d0_min_eig, est.d0_max_eig
    );
    Ok(())
}
