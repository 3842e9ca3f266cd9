//! The rule-of-thumb kernel bandwidth and how the optimism estimate moves
//! with it.
//!
//!     cargo run --release --example bandwidth

use qrisk::dgp::{Dgp, DgpId};
use qrisk::num::RngStream;
use qrisk::optimism::{bandwidth_powell_with, bandwidth_rate, optimism_estimate_with, BandwidthChoice, KappaRule};
use qrisk::oracle::closed_form_trace;
use qrisk::{fit, ModelSpec, SolverOptions};

fn main() -> qrisk::Result<()> {
    for n in [100, 500, 5000] {
        println!("h_n(tau = 0.5, n = {n}) = {:.4}", bandwidth_rate(0.5, n)?);
    }

    let dgp = Dgp::new(DgpId::Dgp1, 4)?;
    let m = ModelSpec::leading(4);
    let target = closed_form_trace(&dgp, &m, 0.5, 500)?;
    println!("\ncorrect model, n = 500, closed form {target:.5}; mean b_hat over 100 samples:");
    for rule in [KappaRule::SampleSd, KappaRule::SampleSdIqr134, KappaRule::StandardError] {
        let mut sums = [0.0; 3];
        let mut width = 0.0;
        for rep in 0..100 {
            let data = dgp.sample(500, &RngStream::new(3, rep))?;
            let f = fit(&data, &m, 0.5, &SolverOptions::default())?;
            width += bandwidth_powell_with(&f, data.n(), rule)?.c / 100.0;
            for (s, scale) in sums.iter_mut().zip([0.5, 1.0, 2.0]) {
                let choice = BandwidthChoice::Powell { kappa: rule, scale };
                *s += optimism_estimate_with(&data, &m, &f, &choice)?.b_hat / 100.0;
            }
        }
        println!("  kappa {rule:<9} c = {width:.3}: h/2 {:.5}  h {:.5}  2h {:.5}", sums[0], sums[1], sums[2]);
    }
    Ok(())
}
