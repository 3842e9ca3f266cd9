//! K-fold cross-validation against the trace estimate over repeated
//! samples: both target the same optimism, CV with more spread.
//!
//!     cargo run --release --example cross_validation

use qrisk::cv::{fold_partition, kfold_cv};
use qrisk::dgp::{Dgp, DgpId};
use qrisk::num::{RngStream, RunningStats};
use qrisk::optimism::optimism_estimate;
use qrisk::{fit, ModelSpec, SolverOptions};

fn main() -> qrisk::Result<()> {
    let folds = fold_partition(10, 3, &RngStream::new(0, 0))?;
    println!("3 folds of 10 observations: {folds:?}");

    let dgp = Dgp::new(DgpId::Dgp1, 10)?;
    let model = ModelSpec::new((1..=10).collect(), true)?;
    let (mut trace, mut cv) = (RunningStats::new(), RunningStats::new());
    for rep in 0..100 {
        let data = dgp.sample(300, &RngStream::new(11, rep))?;
        let f = fit(&data, &model, 0.5, &SolverOptions::default())?;
        trace.push(optimism_estimate(&data, &model, &f, None)?.b_hat);
        cv.push(kfold_cv(&data, &model, 0.5, 10, rep)?.cv_optimism);
    }
    println!("model {model}, 100 samples of n = 300");
    println!("  trace estimate: mean {:.5}, sd {:.5}", trace.mean(), trace.sd());
    println!("  10-fold CV:     mean {:.5}, sd {:.5}", cv.mean(), cv.sd());
    Ok(())
}
