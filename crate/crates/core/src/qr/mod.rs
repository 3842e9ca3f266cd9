//! Linear quantile regression by check-loss minimisation.

mod ipm;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::num::linalg::{dot, solve_square};
use crate::num::Matrix;

/// `rho_tau(u) = u (tau - 1{u < 0})`.
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// `phi_tau(u) = tau - 1{u < 0}`; equals `tau` at zero.
pub fn score(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        tau - 1.0
    } else {
        tau
    }
}

/// Mean check loss of `values`.
pub fn mean_check_loss(values: &[f64], tau: f64) -> f64 {
    values.iter().map(|&u| check_loss(u, tau)).sum::<f64>() / values.len() as f64
}

pub fn validate_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("tau must lie in (0, 1), got {tau}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative duality gap at which the interior point iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Move the interior solution to a nearby basic solution when that
    /// does not increase the objective.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, polish: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub tau: f64,
    pub model: ModelSpec,
    /// Coefficients in design order (intercept first when present).
    pub theta: Vec<f64>,
    /// `y_i - x_i' theta`.
    pub residuals: Vec<f64>,
    /// Mean check loss of the residuals.
    pub objective: f64,
    /// Relative gap between the objective and the dual bound.
    pub duality_gap: f64,
    pub iterations: usize,
}

impl QuantileFit {
    /// Fitted quantile at predictor vector `z` (all `d` predictors).
    pub fn predict(&self, z: &[f64]) -> f64 {
        dot(&self.model.design_row(z), &self.theta)
    }

    pub fn predict_all(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n()).map(|i| self.predict(data.z().row(i))).collect()
    }
}

/// Fits `model` to `data` at quantile level `tau`.
pub fn fit(data: &Dataset, model: &ModelSpec, tau: f64, opts: &SolverOptions) -> Result<QuantileFit> {
    validate_tau(tau)?;
    model.check_dimension(data.d())?;
    let n = data.n();
    if n < model.size() + 2 || n <= model.n_params() {
        return Err(Error::InvalidInput(format!(
            "{n} observations are too few for a model with {} predictors",
            model.size()
        )));
    }
    let x = model.design(data)?;
    let (theta, iterations, duality_gap) = fit_design(&x, data.y(), tau, opts, &model.column_names())?;
    let residuals: Vec<f64> = (0..n).map(|i| data.y()[i] - dot(x.row(i), &theta)).collect();
    Ok(QuantileFit {
        tau,
        model: model.clone(),
        objective: mean_check_loss(&residuals, tau),
        theta,
        residuals,
        duality_gap,
        iterations,
    })
}

fn fit_design(
    x: &Matrix,
    y: &[f64],
    tau: f64,
    opts: &SolverOptions,
    names: &[String],
) -> Result<(Vec<f64>, usize, f64)> {
    if x.cols() == 0 {
        return Ok((Vec::new(), 0, 0.0));
    }
    check_rank(x, names)?;
    let sol = ipm::solve(x, y, tau, opts.tol, opts.max_iter)?;
    let mut theta = sol.beta;
    if opts.polish {
        if let Some(v) = vertex_near(x, y, &theta) {
            let obj = |t: &[f64]| -> f64 {
                mean_check_loss(&(0..y.len()).map(|i| y[i] - dot(x.row(i), t)).collect::<Vec<_>>(), tau)
            };
            let current = obj(&theta);
            if obj(&v) <= current + 4.0 * f64::EPSILON * current.abs() {
                theta = v;
            }
        }
    }
    Ok((theta, sol.iterations, sol.gap))
}

/// Modified Gram-Schmidt on the design columns; names every column that is
/// (numerically) a combination of the columns before it.
pub fn check_rank(x: &Matrix, names: &[String]) -> Result<()> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..x.cols() {
        let mut v = x.column(j);
        let norm0 = dot(&v, &v).sqrt();
        for q in &basis {
            let p = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= p * qi);
        }
        let norm = dot(&v, &v).sqrt();
        if norm0 == 0.0 || norm <= 1e-10 * norm0 {
            dependent.push(names.get(j).cloned().unwrap_or_else(|| format!("column {}", j + 1)));
        } else {
            basis.push(v.into_iter().map(|vi| vi / norm).collect());
        }
    }
    if dependent.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient { columns: dependent })
    }
}

/// Basic solution interpolating the `k` observations with the smallest
/// absolute residual that have linearly independent design rows.
fn vertex_near(x: &Matrix, y: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
    let k = x.cols();
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let abs_r: Vec<f64> = (0..x.rows()).map(|i| (y[i] - dot(x.row(i), theta)).abs()).collect();
    order.sort_by(|&a, &b| abs_r[a].total_cmp(&abs_r[b]));
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut rows = Vec::with_capacity(k);
    for &i in &order {
        let mut v = x.row(i).to_vec();
        let norm0 = dot(&v, &v).sqrt();
        for q in &basis {
            let p = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= p * qi);
        }
        let norm = dot(&v, &v).sqrt();
        if norm0 > 0.0 && norm > 1e-8 * norm0 {
            basis.push(v.into_iter().map(|vi| vi / norm).collect());
            rows.push(i);
            if rows.len() == k {
                break;
            }
        }
    }
    if rows.len() < k {
        return None;
    }
    let mut a = Vec::with_capacity(k * k);
    for &i in &rows {
        a.extend_from_slice(x.row(i));
    }
    let a = Matrix::new(k, k, a).ok()?;
    let b: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    solve_square(&a, &b, 1e-12)
}

/// Anything that produces a quantile fit for a model; lets risk and
/// selection code run with alternative fitting rules.
pub trait Estimator: Send + Sync {
    fn fit(&self, data: &Dataset, model: &ModelSpec, tau: f64) -> Result<QuantileFit>;
}

/// The interior point solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint(pub SolverOptions);

impl Estimator for InteriorPoint {
    fn fit(&self, data: &Dataset, model: &ModelSpec, tau: f64) -> Result<QuantileFit> {
        fit(data, model, tau, &self.0)
    }
}

/// Sets every coefficient to zero, so that residuals equal the responses.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroCoefficients;

impl Estimator for ZeroCoefficients {
    fn fit(&self, data: &Dataset, model: &ModelSpec, tau: f64) -> Result<QuantileFit> {
        validate_tau(tau)?;
        model.check_dimension(data.d())?;
        let residuals = data.y().to_vec();
        Ok(QuantileFit {
            tau,
            model: model.clone(),
            theta: vec![0.0; model.n_params()],
            objective: mean_check_loss(&residuals, tau),
            residuals,
            duality_gap: 0.0,
            iterations: 0,
        })
    }
}

#[cfg(test)]
mod tests;
