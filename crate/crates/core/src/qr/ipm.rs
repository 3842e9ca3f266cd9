//! Primal-dual interior point method for the bounded dual of the linear
//! quantile regression problem:
//!
//! ```text
//!   max  y'a   s.t.  X'a = (1 - tau) X'1,   0 <= a <= 1
//! ```
//!
//! Solved as `min c'x` with `c = -y`, using Mehrotra predictor-corrector
//! steps. The multipliers of the equality constraint are `-beta`.

use crate::error::{Error, Result};
use crate::num::linalg::{dot, weighted_gram};
use crate::num::{Cholesky, Matrix};

use super::check_loss;

const STEP_FRACTION: f64 = 0.99995;
const RIDGE: f64 = 1e-12;

pub(crate) struct LpSolution {
    pub beta: Vec<f64>,
    pub iterations: usize,
    /// `(primal - dual) / max(|primal|, |dual|)`, see [`relative_gap`].
    pub gap: f64,
}

/// Mean check loss of `y - X beta`, the dual bound for the dual point `a`,
/// and their relative difference.
pub(crate) fn relative_gap(y: &[f64], resid: &[f64], a: &[f64], tau: f64) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let primal = resid.iter().map(|&r| check_loss(r, tau)).sum::<f64>() / n;
    let dual = y.iter().zip(a).map(|(&yi, &ai)| yi * (ai - (1.0 - tau))).sum::<f64>() / n;
    let yscale = y.iter().map(|v| v.abs()).sum::<f64>() / n;
    let denom = primal.abs().max(dual.abs()).max(1e-12 * yscale).max(f64::MIN_POSITIVE);
    (primal, dual, ((primal - dual) / denom).max(0.0))
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter().zip(dv).filter(|(_, &d)| d < 0.0).map(|(&x, &d)| -x / d).fold(f64::INFINITY, f64::min)
}

fn xt_times(x: &Matrix, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.cols()];
    for (i, &vi) in v.iter().enumerate() {
        if vi != 0.0 {
            for (o, &xij) in out.iter_mut().zip(x.row(i)) {
                *o += xij * vi;
            }
        }
    }
    out
}

pub(crate) fn solve(x: &Matrix, y: &[f64], tau: f64, tol: f64, max_iter: usize) -> Result<LpSolution> {
    let n = x.rows();
    let nf = n as f64;

    // Least squares start.
    let gram = weighted_gram(x, &vec![1.0; n]);
    let chol = Cholesky::factor(&gram)?;
    let beta_ls = chol.solve_vec(&xt_times(x, y));
    let mut lambda: Vec<f64> = beta_ls.iter().map(|b| -b).collect();
    let resid_of = |lam: &[f64]| -> Vec<f64> { (0..n).map(|i| y[i] + dot(x.row(i), lam)).collect() };
    let r0 = resid_of(&lambda);
    let mean_abs = r0.iter().map(|r| r.abs()).sum::<f64>() / nf;
    let yscale = y.iter().map(|v| v.abs()).sum::<f64>() / nf;
    let delta = mean_abs.max(1e-3 * yscale).max(1e-8);

    let mut xp = vec![1.0 - tau; n];
    let mut sp = vec![tau; n];
    let mut z: Vec<f64> = r0.iter().map(|&r| (-r).max(0.0) + delta).collect();
    let mut w: Vec<f64> = r0.iter().map(|&r| r.max(0.0) + delta).collect();

    let mut gap = f64::INFINITY;
    let mut last_iter = max_iter;
    for iter in 0..=max_iter {
        let resid = resid_of(&lambda);
        let (_, _, g) = relative_gap(y, &resid, &xp, tau);
        gap = g;
        if g <= tol {
            return Ok(LpSolution { beta: lambda.iter().map(|l| -l).collect(), iterations: iter, gap: g });
        }
        if iter == max_iter {
            break;
        }

        let d: Vec<f64> = (0..n).map(|i| 1.0 / (z[i] / xp[i] + w[i] / sp[i])).collect();
        if d.iter().any(|v| !v.is_finite()) {
            last_iter = iter;
            break;
        }
        let chol = match factor_normal_matrix(weighted_gram(x, &d)) {
            Some(c) => c,
            None => {
                last_iter = iter;
                break;
            }
        };
        let direction = |g: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let dg: Vec<f64> = (0..n).map(|i| -d[i] * g[i]).collect();
            let dy = chol.solve_vec(&xt_times(x, &dg));
            let dx: Vec<f64> = (0..n).map(|i| d[i] * (dot(x.row(i), &dy) + g[i])).collect();
            (dy, dx)
        };

        // Predictor (affine scaling) step.
        let g_aff: Vec<f64> = (0..n).map(|i| w[i] - z[i]).collect();
        let (_, dx_a) = direction(&g_aff);
        let dz_a: Vec<f64> = (0..n).map(|i| -z[i] - z[i] * dx_a[i] / xp[i]).collect();
        let dw_a: Vec<f64> = (0..n).map(|i| -w[i] + w[i] * dx_a[i] / sp[i]).collect();
        let ds_a: Vec<f64> = dx_a.iter().map(|v| -v).collect();
        let ap = max_step(&xp, &dx_a).min(max_step(&sp, &ds_a)).min(1.0);
        let ad = max_step(&z, &dz_a).min(max_step(&w, &dw_a)).min(1.0);
        let mu = (dot(&xp, &z) + dot(&sp, &w)) / (2.0 * nf);
        let mu_aff = (0..n)
            .map(|i| (xp[i] + ap * dx_a[i]) * (z[i] + ad * dz_a[i]) + (sp[i] + ap * ds_a[i]) * (w[i] + ad * dw_a[i]))
            .sum::<f64>()
            / (2.0 * nf);
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector step.
        let rxz: Vec<f64> = (0..n).map(|i| sigma * mu - xp[i] * z[i] - dx_a[i] * dz_a[i]).collect();
        let rsw: Vec<f64> = (0..n).map(|i| sigma * mu - sp[i] * w[i] - ds_a[i] * dw_a[i]).collect();
        let g_c: Vec<f64> = (0..n).map(|i| rxz[i] / xp[i] - rsw[i] / sp[i]).collect();
        let (dy, dx) = direction(&g_c);
        let dz: Vec<f64> = (0..n).map(|i| (rxz[i] - z[i] * dx[i]) / xp[i]).collect();
        let dw: Vec<f64> = (0..n).map(|i| (rsw[i] + w[i] * dx[i]) / sp[i]).collect();
        let ds: Vec<f64> = dx.iter().map(|v| -v).collect();
        let ap = (STEP_FRACTION * max_step(&xp, &dx).min(max_step(&sp, &ds))).min(1.0);
        let ad = (STEP_FRACTION * max_step(&z, &dz).min(max_step(&w, &dw))).min(1.0);
        if !(ap > 0.0 && ad > 0.0) || dy.iter().any(|v| !v.is_finite()) {
            last_iter = iter;
            break;
        }
        for i in 0..n {
            xp[i] += ap * dx[i];
            sp[i] += ap * ds[i];
            z[i] += ad * dz[i];
            w[i] += ad * dw[i];
        }
        for (l, dl) in lambda.iter_mut().zip(&dy) {
            *l += ad * dl;
        }
    }
    Err(Error::NonConvergence { iterations: last_iter, gap })
}

/// Near a degenerate optimum the normal matrix can lose positive
/// definiteness to rounding; retry with a small ridge.
fn factor_normal_matrix(mut m: Matrix) -> Option<Cholesky> {
    if let Ok(c) = Cholesky::factor(&m) {
        return Some(c);
    }
    let k = m.rows();
    let ridge = RIDGE * (0..k).map(|i| m[(i, i)]).fold(0.0, f64::max);
    for i in 0..k {
        m[(i, i)] += ridge;
    }
    Cholesky::factor(&m).ok()
}
