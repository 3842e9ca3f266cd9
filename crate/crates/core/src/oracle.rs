//! Ground truth: Monte Carlo predictive risk and optimism, the covariance
//! form, population matrices and the closed forms available for the
//! Gaussian designs.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::dgp::Dgp;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::num::linalg::{dot, weighted_gram};
use crate::num::{normal_inv_cdf, normal_pdf, solve_spd, trace_solve, Matrix, Purpose, RngStream, RunningStats};
use crate::qr::{check_loss, fit, score, validate_tau, Estimator, InteriorPoint, QuantileFit, SolverOptions};

/// Default big-sample size for [`population_coefficients`].
pub const DEFAULT_POPULATION_N: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRiskOptions {
    pub reps: usize,
    /// Fresh evaluation points per replication.
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for McRiskOptions {
    fn default() -> Self {
        Self { reps: 10_000, eval_samples: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRiskOracle {
    /// Mean out-of-sample risk: the predictive risk.
    pub pr: f64,
    /// `pr` minus the mean in-sample risk.
    pub optimism: f64,
    pub pr_se: f64,
    pub optimism_se: f64,
    /// Mean in-sample risk.
    pub in_sample: f64,
    pub reps: usize,
    pub eval_samples: usize,
}

/// One replication of one (model, tau) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReplicate {
    pub in_sample: f64,
    pub out_of_sample: f64,
}

impl McRiskOracle {
    pub fn from_replicates(reps: &[OracleReplicate], eval_samples: usize) -> Self {
        let out: RunningStats = reps.iter().map(|r| r.out_of_sample).collect();
        let diff: RunningStats = reps.iter().map(|r| r.out_of_sample - r.in_sample).collect();
        let ins: RunningStats = reps.iter().map(|r| r.in_sample).collect();
        Self {
            pr: out.mean(),
            optimism: diff.mean(),
            pr_se: out.se(),
            optimism_se: diff.se(),
            in_sample: ins.mean(),
            reps: reps.len(),
            eval_samples,
        }
    }
}

fn check_options(opts: &McRiskOptions) -> Result<()> {
    if opts.reps < 2 {
        return Err(Error::InvalidInput("the oracle needs at least 2 replications".into()));
    }
    if opts.eval_samples < 1 {
        return Err(Error::InvalidInput("eval_samples must be at least 1".into()));
    }
    Ok(())
}

/// Training set of replication `rep`.
pub fn training_sample(dgp: &Dgp, n: usize, seed: u64, rep: u64) -> Result<Dataset> {
    dgp.sample(n, &RngStream::replication(seed, rep, Purpose::Train))
}

/// `(1/m) sum [rho(y0 - q_hat(x0)) - rho(y0)]` over an evaluation set.
pub fn out_of_sample_risk(fit: &QuantileFit, eval: &Dataset) -> f64 {
    let tau = fit.tau;
    let total: f64 = (0..eval.n())
        .map(|i| {
            let y0 = eval.y()[i];
            check_loss(y0 - fit.predict(eval.z().row(i)), tau) - check_loss(y0, tau)
        })
        .sum();
    total / eval.n() as f64
}

fn in_sample(fit: &QuantileFit, data: &Dataset) -> f64 {
    let tau = fit.tau;
    let total: f64 = fit.residuals.iter().zip(data.y()).map(|(&e, &y)| check_loss(e, tau) - check_loss(y, tau)).sum();
    total / data.n() as f64
}

/// Per-replication in-sample and out-of-sample risks for every
/// `(tau, model)` pair, indexed `[rep][tau][model]`. All pairs of a
/// replication share its training and evaluation sets; replication `r`
/// draws from streams keyed by `(seed, r)` only, so the result does not
/// depend on which other models or levels are requested alongside.
pub fn mc_risk_replicates(
    dgp: &Dgp,
    models: &[ModelSpec],
    taus: &[f64],
    n: usize,
    opts: &McRiskOptions,
    estimator: &dyn Estimator,
) -> Result<Vec<Vec<Vec<OracleReplicate>>>> {
    check_options(opts)?;
    for &tau in taus {
        validate_tau(tau)?;
    }
    for m in models {
        m.check_dimension(dgp.p())?;
    }
    (0..opts.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let wrap = |e: Error| Error::Replication { rep: rep as usize, seed: opts.seed, source: Box::new(e) };
            let train = training_sample(dgp, n, opts.seed, rep).map_err(wrap)?;
            let eval =
                dgp.sample(opts.eval_samples, &RngStream::replication(opts.seed, rep, Purpose::Eval)).map_err(wrap)?;
            taus.iter()
                .map(|&tau| {
                    models
                        .iter()
                        .map(|m| {
                            let f = estimator
                                .fit(&train, m, tau)
                                .map_err(|e| wrap(Error::Model { model: m.to_string(), tau, source: Box::new(e) }))?;
                            Ok(OracleReplicate {
                                in_sample: in_sample(&f, &train),
                                out_of_sample: out_of_sample_risk(&f, &eval),
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Monte Carlo predictive risk and expected optimism of `model`, indexed
/// `[tau][model]` for the batch form.
pub fn mc_risk_batch(
    dgp: &Dgp,
    models: &[ModelSpec],
    taus: &[f64],
    n: usize,
    opts: &McRiskOptions,
    estimator: &dyn Estimator,
) -> Result<Vec<Vec<McRiskOracle>>> {
    let reps = mc_risk_replicates(dgp, models, taus, n, opts, estimator)?;
    Ok((0..taus.len())
        .map(|t| {
            (0..models.len())
                .map(|m| {
                    let col: Vec<OracleReplicate> = reps.iter().map(|r| r[t][m]).collect();
                    McRiskOracle::from_replicates(&col, opts.eval_samples)
                })
                .collect()
        })
        .collect())
}

pub fn mc_risk(dgp: &Dgp, model: &ModelSpec, tau: f64, n: usize, opts: &McRiskOptions) -> Result<McRiskOracle> {
    mc_risk_with(dgp, model, tau, n, opts, &InteriorPoint::default())
}

pub fn mc_risk_with(
    dgp: &Dgp,
    model: &ModelSpec,
    tau: f64,
    n: usize,
    opts: &McRiskOptions,
    estimator: &dyn Estimator,
) -> Result<McRiskOracle> {
    let out = mc_risk_batch(dgp, std::slice::from_ref(model), &[tau], n, opts, estimator)?;
    Ok(out[0][0])
}

/// Monte Carlo trace covariance between the score average at the
/// population coefficients and the coefficient error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceForm {
    pub value: f64,
    pub se: f64,
    pub reps: usize,
}

pub fn mc_covariance_form(
    dgp: &Dgp,
    model: &ModelSpec,
    tau: f64,
    n: usize,
    reps: usize,
    seed: u64,
    theta: &[f64],
) -> Result<CovarianceForm> {
    validate_tau(tau)?;
    if reps < 2 {
        return Err(Error::InvalidInput("the covariance form needs at least 2 replications".into()));
    }
    if theta.len() != model.n_params() {
        return Err(Error::DimensionMismatch { expected: model.n_params(), found: theta.len() });
    }
    let opts = SolverOptions::default();
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let wrap = |e: Error| Error::Replication { rep: rep as usize, seed, source: Box::new(e) };
            let train = training_sample(dgp, n, seed, rep).map_err(wrap)?;
            let f = fit(&train, model, tau, &opts).map_err(wrap)?;
            let x = model.design(&train).map_err(wrap)?;
            let k = theta.len();
            let mut g = vec![0.0; k];
            for i in 0..n {
                let row = x.row(i);
                let s = score(train.y()[i] - dot(row, theta), tau) / n as f64;
                g.iter_mut().zip(row).for_each(|(gj, xj)| *gj += s * xj);
            }
            let d: Vec<f64> = f.theta.iter().zip(theta).map(|(a, b)| a - b).collect();
            Ok((g, d))
        })
        .collect::<Result<_>>()?;
    let k = theta.len();
    let r = reps as f64;
    let gbar: Vec<f64> = (0..k).map(|j| draws.iter().map(|(g, _)| g[j]).sum::<f64>() / r).collect();
    let dbar: Vec<f64> = (0..k).map(|j| draws.iter().map(|(_, d)| d[j]).sum::<f64>() / r).collect();
    let products: RunningStats =
        draws.iter().map(|(g, d)| (0..k).map(|j| (g[j] - gbar[j]) * (d[j] - dbar[j])).sum::<f64>()).collect();
    Ok(CovarianceForm { value: products.mean() * r / (r - 1.0), se: products.se(), reps })
}

/// Coefficients of `model` fitted to one sample of size `big_n`.
pub fn population_coefficients(dgp: &Dgp, model: &ModelSpec, tau: f64, big_n: usize, seed: u64) -> Result<Vec<f64>> {
    let data = dgp.sample(big_n, &RngStream::replication(seed, 0, Purpose::Population))?;
    Ok(fit(&data, model, tau, &SolverOptions::default())?.theta)
}

/// Monte Carlo `D0 = E[f(z'theta | x) z z']` and `D1 = E[phi^2(y - z'theta) z z']`.
pub fn population_matrices(
    dgp: &Dgp,
    model: &ModelSpec,
    tau: f64,
    theta: &[f64],
    mc_draws: usize,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    validate_tau(tau)?;
    if theta.len() != model.n_params() {
        return Err(Error::DimensionMismatch { expected: model.n_params(), found: theta.len() });
    }
    if mc_draws == 0 {
        return Err(Error::InvalidInput("mc_draws must be positive".into()));
    }
    let data = dgp.sample(mc_draws, &RngStream::replication(seed, 0, Purpose::Matrices))?;
    let x = model.design(&data)?;
    let m = mc_draws as f64;
    let mut w0 = Vec::with_capacity(mc_draws);
    let mut w1 = Vec::with_capacity(mc_draws);
    for i in 0..mc_draws {
        let q = dot(x.row(i), theta);
        w0.push(dgp.conditional_density(data.z().row(i), q) / m);
        w1.push(score(data.y()[i] - q, tau).powi(2) / m);
    }
    Ok((weighted_gram(&x, &w0), weighted_gram(&x, &w1)))
}

/// `tau (1 - tau) / f * size / n`.
pub fn location_trace(tau: f64, f_at_quantile: f64, size: usize, n: usize) -> Result<f64> {
    validate_tau(tau)?;
    if !(f_at_quantile > 0.0 && f_at_quantile.is_finite()) {
        return Err(Error::InvalidInput(format!("density must be positive, got {f_at_quantile}")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    Ok(tau * (1.0 - tau) / f_at_quantile * size as f64 / n as f64)
}

/// Law of the response given a subset of the covariates in a Gaussian
/// design: `y | x_S ~ N(x_S' beta, sigma^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    pub beta: Vec<f64>,
    pub sigma: f64,
}

pub fn gaussian_conditional(dgp: &Dgp, indices: &[usize]) -> Result<GaussianConditional> {
    let sigma_x = dgp.covariate_covariance()?;
    let noise = dgp.noise_variance()?;
    // y = x1 + x2 + x3 + x4 + noise
    let cov_xy = |i: usize| (0..4).map(|j| sigma_x[(i, j)]).sum::<f64>();
    let var_y = (0..4).map(cov_xy).sum::<f64>() + noise;
    if indices.is_empty() {
        return Ok(GaussianConditional { beta: Vec::new(), sigma: var_y.sqrt() });
    }
    if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > dgp.p()) {
        return Err(Error::InvalidInput(format!("predictor {bad} outside 1..={}", dgp.p())));
    }
    let k = indices.len();
    let mut sss = Matrix::zeros(k, k);
    for (a, &i) in indices.iter().enumerate() {
        for (b, &j) in indices.iter().enumerate() {
            sss[(a, b)] = sigma_x[(i - 1, j - 1)];
        }
    }
    let c = Matrix::new(k, 1, indices.iter().map(|&i| cov_xy(i - 1)).collect())?;
    let beta = solve_spd(&sss, &c)?.column(0);
    let explained = dot(&beta, &c.column(0));
    Ok(GaussianConditional { beta, sigma: (var_y - explained).max(0.0).sqrt() })
}

/// Population quantile regression coefficients in closed form for the
/// Gaussian designs (the linear model is then the exact conditional
/// quantile). Needs an intercept unless `tau = 0.5`.
pub fn gaussian_population_coefficients(dgp: &Dgp, model: &ModelSpec, tau: f64) -> Result<Vec<f64>> {
    validate_tau(tau)?;
    let cond = gaussian_conditional(dgp, model.indices())?;
    let shift = cond.sigma * normal_inv_cdf(tau)?;
    let mut theta = Vec::with_capacity(model.n_params());
    if model.has_intercept() {
        theta.push(shift);
    } else if shift != 0.0 {
        return Err(Error::Unsupported("closed form needs an intercept away from the median".into()));
    }
    theta.extend(cond.beta);
    Ok(theta)
}

/// `(1/n) tr(D0^-1 D1)` in closed form for the Gaussian designs:
/// `tau (1 - tau) sigma_S / phi(Phi^-1(tau)) * (|S| + 1) / n`.
pub fn closed_form_trace(dgp: &Dgp, model: &ModelSpec, tau: f64, n: usize) -> Result<f64> {
    validate_tau(tau)?;
    if !model.has_intercept() {
        return Err(Error::Unsupported("closed form needs an intercept".into()));
    }
    let cond = gaussian_conditional(dgp, model.indices())?;
    let f = normal_pdf(normal_inv_cdf(tau)?) / cond.sigma;
    location_trace(tau, f, model.n_params(), n)
}

/// Nested-model trace `(tau (1 - tau) / n) tr(D0(S1, S2)^-1 D1(S2))` with
/// the density of `y` given the smaller model's predictors, by Monte Carlo
/// over the covariates. Gaussian designs only.
pub fn nested_trace(
    dgp: &Dgp,
    small: &ModelSpec,
    big: &ModelSpec,
    tau: f64,
    n: usize,
    mc_draws: usize,
    seed: u64,
) -> Result<f64> {
    validate_tau(tau)?;
    if !small.is_subset_of(big) {
        return Err(Error::InvalidInput(format!("{small} is not nested in {big}")));
    }
    if mc_draws == 0 || n == 0 {
        return Err(Error::InvalidInput("n and mc_draws must be positive".into()));
    }
    let theta = gaussian_population_coefficients(dgp, big, tau)?;
    let cond = gaussian_conditional(dgp, small.indices())?;
    let data = dgp.sample(mc_draws, &RngStream::replication(seed, 0, Purpose::Matrices))?;
    let x = big.design(&data)?;
    let m = mc_draws as f64;
    let mut w0 = Vec::with_capacity(mc_draws);
    for i in 0..mc_draws {
        let z = data.z().row(i);
        let mean1: f64 = small.indices().iter().zip(&cond.beta).map(|(&j, b)| z[j - 1] * b).sum();
        let u = (dot(x.row(i), &theta) - mean1) / cond.sigma;
        w0.push(normal_pdf(u) / cond.sigma / m);
    }
    let d0 = weighted_gram(&x, &w0);
    let d1 = weighted_gram(&x, &vec![1.0 / m; mc_draws]);
    Ok(tau * (1.0 - tau) * trace_solve(&d0, &d1)? / n as f64)
}

/// Slope of the trace in model size along a chain of irrelevant
/// additions to a model holding `j` of the four relevant DGP1 predictors.
pub fn dgp1_stratum_slope(j: usize, tau: f64, n: usize) -> Result<f64> {
    validate_tau(tau)?;
    if j > 4 {
        return Err(Error::InvalidInput(format!("stratum must be 0..=4, got {j}")));
    }
    let sigma = (8.0 - j as f64).sqrt();
    Ok(tau * (1.0 - tau) * sigma / normal_pdf(normal_inv_cdf(tau)?) / n as f64)
}

/// The same slope with the density of `N(0, j^2 + 1)` at zero, as stated
/// in the source of the experiment design. Kept for comparison.
pub fn dgp1_stratum_slope_stated(j: usize, tau: f64, n: usize) -> Result<f64> {
    validate_tau(tau)?;
    let var = (j * j + 1) as f64;
    let phi_j = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    Ok(tau * (1.0 - tau) / (n as f64 * phi_j))
}
