//! Choose among nested candidates by the smallest de-biased risk.
//!
//!     cargo run --release --example model_selection

use qrisk::dgp::{Dgp, DgpId};
use qrisk::num::RngStream;
use qrisk::optimism::{debiased_risk, select_model};
use qrisk::{fit, ModelSpec, SolverOptions};

fn main() -> qrisk::Result<()> {
    let dgp = Dgp::new(DgpId::Dgp2, 12)?;
    let candidates: Vec<ModelSpec> = (0..=12).map(ModelSpec::leading).collect();
    let mut picks = [0usize; 13];
    for rep in 0..40 {
        let data = dgp.sample(400, &RngStream::new(5, rep))?;
        let reports = candidates
            .iter()
            .map(|m| {
                let f = fit(&data, m, 0.5, &SolverOptions::default())?;
                debiased_risk(&data, m, &f, None)
            })
            .collect::<qrisk::Result<Vec<_>>>()?;
        if rep == 0 {
            for r in &reports {
                println!(
                    "{:<40} in-sample {:>8.4}  de-biased {:>8.4}",
                    r.model.to_string(),
                    r.in_sample,
                    r.pr_debiased
                );
            }
        }
        picks[select_model(&reports)?.size()] += 1;
    }
    println!("\nselected size over 40 samples (true size 4):");
    for (size, count) in picks.iter().enumerate().filter(|(_, c)| **c > 0) {
        println!("  {size:>2}: {}", "#".repeat(*count));
    }
    Ok(())
}
