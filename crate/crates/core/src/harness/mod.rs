//! Replicated simulation experiments over a model collection.
//!
//! Every replication owns its random streams, keyed by `(seed, rep)`, and
//! per-replication results are reduced in replication order. Output is
//! therefore identical for any number of worker threads.

mod config;

use std::io::Write;

use rayon::prelude::*;

pub use config::{models_i_to_iv, Collection, EstimatorFlags, ExperimentConfig};

use crate::cv::{fold_partition, kfold_cv_with_folds};
use crate::dataset::fmt_f64;
use crate::dgp::Dgp;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::num::{Purpose, RngStream, RunningStats};
use crate::optimism::{in_sample_risk, optimism_estimate_with, BandwidthChoice};
use crate::oracle::{closed_form_trace, mc_risk_batch, training_sample, McRiskOptions, McRiskOracle};
use crate::qr::{Estimator, InteriorPoint};

pub const DEFAULT_PER_STRATUM: usize = 35;

/// Oracle replications use `seed ^ ORACLE_SEED_MASK` so that their training
/// sets are independent of the experiment's.
pub const ORACLE_SEED_MASK: u64 = 0x6f72_6163_6c65;

/// CSV columns, in order.
pub const COLUMNS: [&str; 12] = [
    "tau",
    "model_id",
    "model_size",
    "stratum",
    "b_hat_mean",
    "b_hat_sd",
    "cv_opt_mean",
    "cv_opt_sd",
    "oracle_optimism",
    "oracle_pr",
    "closed_form_trace",
    "pr_debiased_mean",
];

/// Intercept-only model, then for each stratum `j = 0..=4` the base model
/// `{1..j}` followed by nested extensions adding predictors 5, 6, 7, ...
/// one at a time, `count` models per stratum. The stratum-0 base repeats
/// the intercept-only model.
pub fn build_collection_dgp1(count: usize, p: usize) -> Result<Vec<ModelSpec>> {
    if count == 0 {
        return Err(Error::InvalidInput("count per stratum must be positive".into()));
    }
    if p < 4 + count - 1 {
        return Err(Error::InvalidInput(format!(
            "p = {p} is too small for {count} models per stratum (need {})",
            4 + count - 1
        )));
    }
    let mut models = vec![ModelSpec::intercept_only()];
    for j in 0..=4 {
        for extra in 0..count {
            let indices: Vec<usize> = (1..=j).chain(5..5 + extra).collect();
            models.push(ModelSpec::new(indices, true)?);
        }
    }
    Ok(models)
}

/// Number of the four relevant DGP predictors a model contains.
pub fn stratum(model: &ModelSpec) -> usize {
    model.indices().iter().filter(|&&i| i <= 4).count()
}

/// Per-replication values for one (tau, model) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepRecord {
    pub b_hat: Option<f64>,
    pub cv_optimism: Option<f64>,
    pub pr_debiased: Option<f64>,
    pub in_sample: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub tau: f64,
    /// 1-based position in the collection.
    pub model_id: usize,
    pub model: ModelSpec,
    pub model_size: usize,
    pub stratum: usize,
    pub b_hat_mean: Option<f64>,
    pub b_hat_sd: Option<f64>,
    pub cv_opt_mean: Option<f64>,
    pub cv_opt_sd: Option<f64>,
    pub oracle_optimism: Option<f64>,
    pub oracle_pr: Option<f64>,
    pub closed_form_trace: Option<f64>,
    pub pr_debiased_mean: Option<f64>,
    /// Not written to the CSV.
    pub oracle: Option<McRiskOracle>,
    pub reps: usize,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub models: Vec<ModelSpec>,
    pub rows: Vec<ExperimentRow>,
    /// `[rep][tau][model]` for the replications that completed before the
    /// first failure (all of them on success).
    pub replicates: Vec<Vec<Vec<RepRecord>>>,
    /// The failure of the lowest-numbered failing replication, if any.
    pub failure: Option<Error>,
}

fn one_replication(
    cfg: &ExperimentConfig,
    dgp: &Dgp,
    models: &[ModelSpec],
    rep: u64,
    estimator: &dyn Estimator,
) -> Result<Vec<Vec<RepRecord>>> {
    let wrap = |e: Error| Error::Replication { rep: rep as usize, seed: cfg.seed, source: Box::new(e) };
    let data = training_sample(dgp, cfg.n, cfg.seed, rep).map_err(wrap)?;
    let folds = if cfg.estimators.cv {
        Some(fold_partition(cfg.n, cfg.cv_k, &RngStream::replication(cfg.seed, rep, Purpose::Folds)).map_err(wrap)?)
    } else {
        None
    };
    let choice = BandwidthChoice::Powell { kappa: cfg.kappa, scale: cfg.bandwidth_scale };
    cfg.taus
        .iter()
        .map(|&tau| {
            models
                .iter()
                .map(|m| {
                    let ctx = |e: Error| wrap(Error::Model { model: m.to_string(), tau, source: Box::new(e) });
                    let fit = estimator.fit(&data, m, tau).map_err(ctx)?;
                    let in_sample = in_sample_risk(&data, m, &fit).map_err(ctx)?;
                    let b_hat = if cfg.estimators.trace {
                        Some(optimism_estimate_with(&data, m, &fit, &choice).map_err(ctx)?.b_hat)
                    } else {
                        None
                    };
                    let cv_optimism = match &folds {
                        Some(f) => Some(
                            kfold_cv_with_folds(&data, m, tau, f, estimator, Some(in_sample)).map_err(ctx)?.cv_optimism,
                        ),
                        None => None,
                    };
                    Ok(RepRecord { b_hat, cv_optimism, pr_debiased: b_hat.map(|b| in_sample + b), in_sample })
                })
                .collect()
        })
        .collect()
}

fn stats_of(values: impl Iterator<Item = Option<f64>>) -> Option<RunningStats> {
    let mut s = RunningStats::new();
    for v in values {
        s.push(v?);
    }
    Some(s)
}

/// Runs the experiment on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_with(cfg, &InteriorPoint::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, estimator: &dyn Estimator) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let dgp = Dgp::new(cfg.dgp, cfg.p)?;
    let models = cfg.collection.models(cfg.p)?;

    let results: Vec<Result<Vec<Vec<RepRecord>>>> =
        (0..cfg.reps as u64).into_par_iter().map(|rep| one_replication(cfg, &dgp, &models, rep, estimator)).collect();
    let mut replicates = Vec::with_capacity(cfg.reps);
    let mut failure = None;
    for r in results {
        match r {
            Ok(v) => replicates.push(v),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    let oracle = if cfg.estimators.oracle && failure.is_none() {
        let limit = cfg.oracle_max_size.unwrap_or(usize::MAX);
        let picked: Vec<usize> = (0..models.len()).filter(|&i| models[i].size() <= limit).collect();
        let subset: Vec<ModelSpec> = picked.iter().map(|&i| models[i].clone()).collect();
        let opts =
            McRiskOptions { reps: cfg.oracle_reps, eval_samples: cfg.oracle_eval, seed: cfg.seed ^ ORACLE_SEED_MASK };
        match mc_risk_batch(&dgp, &subset, &cfg.taus, cfg.n, &opts, estimator) {
            Ok(table) => Some((picked, table)),
            Err(e) => {
                failure = Some(e);
                None
            }
        }
    } else {
        None
    };

    let mut rows = Vec::with_capacity(cfg.taus.len() * models.len());
    for (t, &tau) in cfg.taus.iter().enumerate() {
        for (m, model) in models.iter().enumerate() {
            let b = stats_of(replicates.iter().map(|r| r[t][m].b_hat)).filter(|s| s.count() > 0);
            let c = stats_of(replicates.iter().map(|r| r[t][m].cv_optimism)).filter(|s| s.count() > 0);
            let pr = stats_of(replicates.iter().map(|r| r[t][m].pr_debiased)).filter(|s| s.count() > 0);
            let o =
                oracle.as_ref().and_then(|(picked, table)| picked.iter().position(|&i| i == m).map(|j| table[t][j]));
            let closed =
                if cfg.estimators.closed_form { closed_form_trace(&dgp, model, tau, cfg.n).ok() } else { None };
            rows.push(ExperimentRow {
                tau,
                model_id: m + 1,
                model: model.clone(),
                model_size: model.size(),
                stratum: stratum(model),
                b_hat_mean: b.map(|s| s.mean()),
                b_hat_sd: b.map(|s| s.sd()),
                cv_opt_mean: c.map(|s| s.mean()),
                cv_opt_sd: c.map(|s| s.sd()),
                oracle_optimism: o.map(|o| o.optimism),
                oracle_pr: o.map(|o| o.pr),
                closed_form_trace: closed,
                pr_debiased_mean: pr.map(|s| s.mean()),
                oracle: o,
                reps: replicates.len(),
            });
        }
    }
    Ok(ExperimentOutput { models, rows, replicates, failure })
}

/// Runs on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "NA".to_string())
}

/// Writes the `#` header (resolved configuration and model list), the
/// column header and one row per (tau, model). A failure is recorded as a
/// final `# FAILED` line after the rows aggregated so far.
pub fn write_experiment_csv<W: Write>(cfg: &ExperimentConfig, output: &ExperimentOutput, mut out: W) -> Result<()> {
    writeln!(out, "# qrisk experiment")?;
    for line in cfg.to_text().lines() {
        writeln!(out, "# {line}")?;
    }
    for (i, m) in output.models.iter().enumerate() {
        writeln!(out, "# model {} = {}", i + 1, m)?;
    }
    writeln!(out, "{}", COLUMNS.join(","))?;
    for r in &output.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.tau),
            r.model_id,
            r.model_size,
            r.stratum,
            cell(r.b_hat_mean),
            cell(r.b_hat_sd),
            cell(r.cv_opt_mean),
            cell(r.cv_opt_sd),
            cell(r.oracle_optimism),
            cell(r.oracle_pr),
            cell(r.closed_form_trace),
            cell(r.pr_debiased_mean),
        )?;
    }
    if let Some(e) = &output.failure {
        writeln!(out, "# FAILED after {} complete replications: {e}", output.replicates.len())?;
    }
    out.flush()?;
    Ok(())
}

/// Equal-width histogram over `[min, max]`; the top edge is inclusive.
pub fn aggregate_histogram(values: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if values.is_empty() {
        return Err(Error::InvalidInput("histogram of no values".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidInput("histogram needs at least one bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("histogram values must be finite".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let idx = if width > 0.0 { (((v - lo) / width) as usize).min(bins - 1) } else { 0 };
        counts[idx] += 1;
    }
    Ok((edges, counts))
}
