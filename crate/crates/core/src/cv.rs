//! K-fold cross-validation estimates of predictive risk and optimism.

use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::num::{Purpose, RngStream};
use crate::qr::{check_loss, validate_tau, Estimator, InteriorPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct CvEstimate {
    pub k: usize,
    /// Held-out risk averaged over all observations.
    pub cv_risk: f64,
    /// `cv_risk` minus the full-sample in-sample risk.
    pub cv_optimism: f64,
    pub in_sample: f64,
    pub fold_sizes: Vec<usize>,
}

/// Random partition of `0..n` into `k` folds: a seeded shuffle cut into
/// contiguous blocks whose sizes differ by at most one.
pub fn fold_partition(n: usize, k: usize, stream: &RngStream) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!("need 2 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream.rng());
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(perm[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// `k`-fold CV of `model` with folds drawn from `seed`.
pub fn kfold_cv(data: &Dataset, model: &ModelSpec, tau: f64, k: usize, seed: u64) -> Result<CvEstimate> {
    let folds = fold_partition(data.n(), k, &RngStream::replication(seed, 0, Purpose::Folds))?;
    kfold_cv_with_folds(data, model, tau, &folds, &InteriorPoint::default(), None)
}

/// CV over the given folds. `in_sample` is the full-sample in-sample risk
/// when already known; otherwise the model is fitted to all of `data`.
pub fn kfold_cv_with_folds(
    data: &Dataset,
    model: &ModelSpec,
    tau: f64,
    folds: &[Vec<usize>],
    estimator: &dyn Estimator,
    in_sample: Option<f64>,
) -> Result<CvEstimate> {
    validate_tau(tau)?;
    let n = data.n();
    let mut fold_of = vec![usize::MAX; n];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            if i >= n || fold_of[i] != usize::MAX {
                return Err(Error::InvalidInput("folds must partition the observations".into()));
            }
            fold_of[i] = f;
        }
    }
    if fold_of.contains(&usize::MAX) || folds.len() < 2 || folds.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput("folds must partition the observations".into()));
    }

    let mut held_out = vec![0.0; n];
    for (f, fold) in folds.iter().enumerate() {
        let train_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let train = data.subset(&train_rows);
        let fit = estimator.fit(&train, model, tau).map_err(|e| Error::Fold { fold: f, source: Box::new(e) })?;
        for &i in fold {
            let y = data.y()[i];
            held_out[i] = check_loss(y - fit.predict(data.z().row(i)), tau) - check_loss(y, tau);
        }
    }
    // Summed in observation order, so fold order does not matter.
    let cv_risk = held_out.iter().sum::<f64>() / n as f64;
    let in_sample = match in_sample {
        Some(v) => v,
        None => {
            let fit = estimator.fit(data, model, tau)?;
            crate::optimism::in_sample_risk(data, model, &fit)?
        }
    };
    Ok(CvEstimate {
        k: folds.len(),
        cv_risk,
        cv_optimism: cv_risk - in_sample,
        in_sample,
        fold_sizes: folds.iter().map(Vec::len).collect(),
    })
}
