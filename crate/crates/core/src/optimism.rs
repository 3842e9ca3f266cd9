//! Trace-form estimate of the expected optimism and the de-biased risk.
//!
//! `b_hat = tr(D0^-1 D1) / n` where `D0` is a uniform-kernel (Powell)
//! estimate of the density-weighted Gram matrix and `D1` the Gram matrix
//! weighted by the squared score.

use std::fmt;
use std::str::FromStr;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::num::linalg::weighted_gram;
use crate::num::stats::{interquartile_range, sample_sd};
use crate::num::{eig_extremes, normal_inv_cdf, normal_pdf, trace_solve, Matrix};
use crate::qr::{check_loss, score, QuantileFit};

/// Smallest admissible eigenvalue of `D0`.
pub const D0_EIG_FLOOR: f64 = 1e-10;

const TAU_CLAMP: (f64, f64) = (0.001, 0.999);

/// Residual scale `kappa` in the bandwidth rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaRule {
    /// `min(sd, IQR)` of the residuals.
    #[default]
    SampleSd,
    /// `min(sd, IQR / 1.34)`, the usual Hall-Sheather practice.
    SampleSdIqr134,
    /// `min(sd, IQR) / sqrt(n)`.
    StandardError,
}

impl fmt::Display for KappaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KappaRule::SampleSd => "sd",
            KappaRule::SampleSdIqr134 => "sd-iqr134",
            KappaRule::StandardError => "se",
        })
    }
}

impl FromStr for KappaRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sd" => Ok(KappaRule::SampleSd),
            "sd-iqr134" => Ok(KappaRule::SampleSdIqr134),
            "se" => Ok(KappaRule::StandardError),
            other => Err(Error::InvalidInput(format!("unknown kappa rule {other:?} (expected sd, sd-iqr134 or se)"))),
        }
    }
}

/// How the kernel half-width is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthChoice {
    /// Powell rule, multiplied by `scale` (1 for the rule itself).
    Powell {
        kappa: KappaRule,
        scale: f64,
    },
    Fixed(f64),
}

impl Default for BandwidthChoice {
    fn default() -> Self {
        BandwidthChoice::Powell { kappa: KappaRule::SampleSd, scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthInfo {
    /// Rate term `n^{-1/5} (...)^{1/5}` on the probability scale.
    pub h_n: f64,
    /// Residual scale.
    pub kappa: f64,
    /// Kernel half-width actually used.
    pub c: f64,
    pub clamp_applied: bool,
}

impl BandwidthInfo {
    /// A directly supplied half-width; `h_n` and `kappa` are NaN.
    pub fn fixed(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {c}")));
        }
        Ok(Self { h_n: f64::NAN, kappa: f64::NAN, c, clamp_applied: false })
    }
}

/// Rate term of the bandwidth rule.
pub fn bandwidth_rate(tau: f64, n: usize) -> Result<f64> {
    let q = normal_inv_cdf(tau)?;
    let dens = normal_pdf(q);
    let ratio = 4.5 * dens.powi(4) / (2.0 * q * q + 1.0).powi(2);
    Ok((n as f64).powf(-0.2) * ratio.powf(0.2))
}

/// Bandwidth from the residuals of `fit` with the default residual scale.
pub fn bandwidth_powell(fit: &QuantileFit, n: usize) -> Result<BandwidthInfo> {
    bandwidth_powell_with(fit, n, KappaRule::SampleSd)
}

pub fn bandwidth_powell_with(fit: &QuantileFit, n: usize, rule: KappaRule) -> Result<BandwidthInfo> {
    if n < 4 || fit.residuals.len() < 4 {
        return Err(Error::InvalidInput("the bandwidth rule needs at least 4 residuals".into()));
    }
    let tau = fit.tau;
    let h_n = bandwidth_rate(tau, n)?;
    let sd = sample_sd(&fit.residuals);
    let iqr = interquartile_range(&fit.residuals);
    let kappa = match rule {
        KappaRule::SampleSd => sd.min(iqr),
        KappaRule::SampleSdIqr134 => sd.min(iqr / 1.34),
        KappaRule::StandardError => sd.min(iqr) / (n as f64).sqrt(),
    };
    if !(kappa > 0.0) {
        return Err(Error::DegenerateResidualScale);
    }
    let (lo, hi) = (tau - h_n, tau + h_n);
    let clamp_applied = lo < TAU_CLAMP.0 || hi > TAU_CLAMP.1;
    let lo = lo.clamp(TAU_CLAMP.0, TAU_CLAMP.1);
    let hi = hi.clamp(TAU_CLAMP.0, TAU_CLAMP.1);
    let c = kappa * (normal_inv_cdf(hi)? - normal_inv_cdf(lo)?);
    Ok(BandwidthInfo { h_n, kappa, c, clamp_applied })
}

fn check_fit(data: &Dataset, model: &ModelSpec, fit: &QuantileFit) -> Result<()> {
    if fit.residuals.len() != data.n() {
        return Err(Error::DimensionMismatch { expected: data.n(), found: fit.residuals.len() });
    }
    if fit.theta.len() != model.n_params() {
        return Err(Error::DimensionMismatch { expected: model.n_params(), found: fit.theta.len() });
    }
    Ok(())
}

/// `(1/(2nh)) sum 1{|e_i| <= h} x_i x_i'`.
pub fn d0_hat(data: &Dataset, model: &ModelSpec, fit: &QuantileFit, h: f64) -> Result<Matrix> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")));
    }
    check_fit(data, model, fit)?;
    let x = model.design(data)?;
    let w0 = 1.0 / (2.0 * data.n() as f64 * h);
    let weights: Vec<f64> = fit.residuals.iter().map(|r| if r.abs() <= h { w0 } else { 0.0 }).collect();
    Ok(weighted_gram(&x, &weights))
}

/// `(1/n) sum phi_tau(e_i)^2 x_i x_i'`.
pub fn d1_hat(data: &Dataset, model: &ModelSpec, fit: &QuantileFit) -> Result<Matrix> {
    check_fit(data, model, fit)?;
    let x = model.design(data)?;
    let n = data.n() as f64;
    let weights: Vec<f64> = fit.residuals.iter().map(|&r| score(r, fit.tau).powi(2) / n).collect();
    Ok(weighted_gram(&x, &weights))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimismEstimate {
    pub bandwidth: BandwidthInfo,
    /// `tr(D0^-1 D1)`.
    pub trace: f64,
    /// `trace / n`.
    pub b_hat: f64,
    pub d0_min_eig: f64,
    pub d0_max_eig: f64,
}

/// `b_hat` with the default bandwidth rule, or the half-width `h` if given.
pub fn optimism_estimate(
    data: &Dataset,
    model: &ModelSpec,
    fit: &QuantileFit,
    h: Option<f64>,
) -> Result<OptimismEstimate> {
    let choice = match h {
        Some(h) => BandwidthChoice::Fixed(h),
        None => BandwidthChoice::default(),
    };
    optimism_estimate_with(data, model, fit, &choice)
}

pub fn optimism_estimate_with(
    data: &Dataset,
    model: &ModelSpec,
    fit: &QuantileFit,
    choice: &BandwidthChoice,
) -> Result<OptimismEstimate> {
    check_fit(data, model, fit)?;
    let bandwidth = match *choice {
        BandwidthChoice::Fixed(h) => BandwidthInfo::fixed(h)?,
        BandwidthChoice::Powell { kappa, scale } => {
            let mut b = bandwidth_powell_with(fit, data.n(), kappa)?;
            b.c *= scale;
            b
        }
    };
    if model.n_params() == 0 {
        return Ok(OptimismEstimate { bandwidth, trace: 0.0, b_hat: 0.0, d0_min_eig: f64::NAN, d0_max_eig: f64::NAN });
    }
    let d0 = d0_hat(data, model, fit, bandwidth.c)?;
    let d1 = d1_hat(data, model, fit)?;
    let (lo, hi) = eig_extremes(&d0)?;
    if !(lo > D0_EIG_FLOOR) {
        return Err(Error::SingularDensitySandwich { min_eig: lo });
    }
    let trace = trace_solve(&d0, &d1)?;
    Ok(OptimismEstimate { bandwidth, trace, b_hat: trace / data.n() as f64, d0_min_eig: lo, d0_max_eig: hi })
}

/// `(1/n) sum [rho(e_i) - rho(y_i)]`.
pub fn in_sample_risk(data: &Dataset, model: &ModelSpec, fit: &QuantileFit) -> Result<f64> {
    check_fit(data, model, fit)?;
    let tau = fit.tau;
    let total: f64 = fit.residuals.iter().zip(data.y()).map(|(&e, &y)| check_loss(e, tau) - check_loss(y, tau)).sum();
    Ok(total / data.n() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub tau: f64,
    pub model: ModelSpec,
    pub in_sample: f64,
    pub b_hat: f64,
    /// `in_sample + b_hat`.
    pub pr_debiased: f64,
    pub cv_risk: Option<f64>,
    pub oracle_pr: Option<f64>,
    /// Kernel half-width, NaN when no estimate was made.
    pub bandwidth: f64,
    pub d0_min_eig: f64,
}

impl RiskReport {
    pub fn new(tau: f64, model: ModelSpec, in_sample: f64, b_hat: f64) -> Self {
        Self {
            tau,
            model,
            in_sample,
            b_hat,
            pr_debiased: in_sample + b_hat,
            cv_risk: None,
            oracle_pr: None,
            bandwidth: f64::NAN,
            d0_min_eig: f64::NAN,
        }
    }
}

pub fn debiased_risk(data: &Dataset, model: &ModelSpec, fit: &QuantileFit, h: Option<f64>) -> Result<RiskReport> {
    let choice = match h {
        Some(h) => BandwidthChoice::Fixed(h),
        None => BandwidthChoice::default(),
    };
    debiased_risk_with(data, model, fit, &choice)
}

pub fn debiased_risk_with(
    data: &Dataset,
    model: &ModelSpec,
    fit: &QuantileFit,
    choice: &BandwidthChoice,
) -> Result<RiskReport> {
    let est = optimism_estimate_with(data, model, fit, choice)?;
    let mut report = RiskReport::new(fit.tau, model.clone(), in_sample_risk(data, model, fit)?, est.b_hat);
    report.bandwidth = est.bandwidth.c;
    report.d0_min_eig = est.d0_min_eig;
    Ok(report)
}

/// The model with the smallest de-biased risk; ties go to the smaller
/// model, then to the lexicographically smaller index list.
pub fn select_model(reports: &[RiskReport]) -> Result<ModelSpec> {
    let first = reports.first().ok_or_else(|| Error::InvalidInput("no risk reports to select from".into()))?;
    if reports.iter().any(|r| r.tau != first.tau) {
        return Err(Error::InvalidInput("all reports must share the same tau".into()));
    }
    if reports.iter().any(|r| r.pr_debiased.is_nan()) {
        return Err(Error::InvalidInput("de-biased risk is NaN".into()));
    }
    let best = reports
        .iter()
        .min_by(|a, b| a.pr_debiased.total_cmp(&b.pr_debiased).then_with(|| a.model.size_then_lex(&b.model)))
        .expect("nonempty");
    Ok(best.model.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{Dgp, DgpId};
    use crate::num::RngStream;
    use crate::qr::{fit, SolverOptions};
    use proptest::prelude::*;

    fn fake_fit(model: &ModelSpec, tau: f64, residuals: Vec<f64>) -> QuantileFit {
        QuantileFit {
            tau,
            model: model.clone(),
            theta: vec![0.0; model.n_params()],
            objective: 0.0,
            residuals,
            duality_gap: 0.0,
            iterations: 0,
        }
    }

    fn two_points() -> Dataset {
        Dataset::new(vec![0.0, 0.0], Matrix::zeros(2, 1)).unwrap()
    }

    #[test]
    fn rate_term_at_median() {
        // 500^{-1/5} (4.5 phi(0)^4)^{1/5}
        let expect = 500f64.powf(-0.2) * (4.5 * (1.0 / (2.0 * std::f64::consts::PI).sqrt()).powi(4)).powf(0.2);
        let h = bandwidth_rate(0.5, 500).unwrap();
        assert!((h - expect).abs() < 1e-15);
        assert!((h - 0.18687).abs() < 1e-4);
    }

    #[test]
    fn powell_bandwidth_at_median() {
        // Residuals with sd exactly 1 and a wider IQR.
        let r: Vec<f64> = vec![-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
        let sd = sample_sd(&r);
        let r: Vec<f64> = r.iter().map(|v| v / sd).collect();
        assert!(interquartile_range(&r) > 1.0);
        let f = fake_fit(&ModelSpec::intercept_only(), 0.5, r);
        let b = bandwidth_powell(&f, 500).unwrap();
        assert!((b.kappa - 1.0).abs() < 1e-12);
        let q = normal_inv_cdf(0.5 + b.h_n).unwrap();
        assert!((b.c - 2.0 * q).abs() < 1e-12);
        assert!(!b.clamp_applied);
    }

    #[test]
    fn kappa_variants() {
        let r: Vec<f64> = (0..40).map(|i| ((i * 37) % 40) as f64 / 10.0).collect();
        let f = fake_fit(&ModelSpec::intercept_only(), 0.5, r.clone());
        let sd = sample_sd(&r);
        let iqr = interquartile_range(&r);
        let a = bandwidth_powell_with(&f, 40, KappaRule::SampleSd).unwrap();
        let b = bandwidth_powell_with(&f, 40, KappaRule::SampleSdIqr134).unwrap();
        let c = bandwidth_powell_with(&f, 40, KappaRule::StandardError).unwrap();
        assert_eq!(a.kappa, sd.min(iqr));
        assert_eq!(b.kappa, sd.min(iqr / 1.34));
        assert_eq!(c.kappa, sd.min(iqr) / 40f64.sqrt());
        for s in ["sd", "sd-iqr134", "se"] {
            assert_eq!(s.parse::<KappaRule>().unwrap().to_string(), s);
        }
        assert!("iqr".parse::<KappaRule>().is_err());
    }

    #[test]
    fn clamp_fires_in_the_tails() {
        let r: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let f = fake_fit(&ModelSpec::intercept_only(), 0.02, r);
        let b = bandwidth_powell(&f, 10).unwrap();
        assert!(b.clamp_applied);
        assert!(b.c > 0.0);
    }

    #[test]
    fn degenerate_scale() {
        let f = fake_fit(&ModelSpec::intercept_only(), 0.5, vec![1.0; 8]);
        assert!(matches!(bandwidth_powell(&f, 8), Err(Error::DegenerateResidualScale)));
    }

    #[test]
    fn d0_d1_hand_examples() {
        let m = ModelSpec::intercept_only();
        let ds = two_points();
        let f = fake_fit(&m, 0.5, vec![0.1, 5.0]);
        assert_eq!(d0_hat(&ds, &m, &f, 1.0).unwrap()[(0, 0)], 0.25);
        let f = fake_fit(&m, 0.5, vec![1.0, -1.0]);
        assert_eq!(d1_hat(&ds, &m, &f).unwrap()[(0, 0)], 0.25);
        // No indicator fires.
        let f = fake_fit(&m, 0.5, vec![2.0, -3.0]);
        assert_eq!(d0_hat(&ds, &m, &f, 1.0).unwrap()[(0, 0)], 0.0);
        // All fire: (1/(2h)) times the empirical Gram.
        assert_eq!(d0_hat(&ds, &m, &f, 10.0).unwrap()[(0, 0)], 1.0 / 20.0);
        assert!(d0_hat(&ds, &m, &f, 0.0).is_err());
    }

    #[test]
    fn d1_with_constant_score() {
        let mut rng = RngStream::new(4, 4).rng();
        let ds = Dgp::new(DgpId::Dgp1, 4).unwrap().sample(30, &RngStream::new(4, 4)).unwrap();
        let m = ModelSpec::leading(3);
        let r: Vec<f64> = (0..30).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let f = fake_fit(&m, 0.8, r);
        let d1 = d1_hat(&ds, &m, &f).unwrap();
        let x = m.design(&ds).unwrap();
        let gram = weighted_gram(&x, &vec![1.0 / 30.0; 30]);
        for (a, b) in d1.data().iter().zip(gram.data()) {
            assert!((a - 0.64 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_sandwich_is_an_error() {
        let m = ModelSpec::intercept_only();
        let ds = two_points();
        let f = fake_fit(&m, 0.5, vec![2.0, -3.0]);
        match optimism_estimate(&ds, &m, &f, Some(1.0)) {
            Err(Error::SingularDensitySandwich { min_eig }) => assert_eq!(min_eig, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn in_sample_hand_example() {
        let ds = Dataset::new(vec![1.0, 2.0, 4.0], Matrix::zeros(3, 1)).unwrap();
        let m = ModelSpec::intercept_only();
        let f = fit(&ds, &m, 0.5, &SolverOptions { polish: true, ..Default::default() }).unwrap();
        assert_eq!(f.theta, vec![2.0]);
        let r = in_sample_risk(&ds, &m, &f).unwrap();
        assert!((r - (1.5 - 3.5) / 3.0).abs() < 1e-10, "{r}");
    }

    #[test]
    fn zero_fit_has_zero_in_sample_risk() {
        let ds = Dgp::new(DgpId::Dgp1, 4).unwrap().sample(20, &RngStream::new(1, 1)).unwrap();
        let m = ModelSpec::leading(4);
        let f = crate::qr::Estimator::fit(&crate::qr::ZeroCoefficients, &ds, &m, 0.5).unwrap();
        assert_eq!(in_sample_risk(&ds, &m, &f).unwrap(), 0.0);
        let rep = RiskReport::new(0.5, m, 0.0, 0.0);
        assert_eq!((rep.in_sample, rep.b_hat, rep.pr_debiased), (0.0, 0.0, 0.0));
    }

    #[test]
    fn report_sum_contract() {
        let rep = RiskReport::new(0.5, ModelSpec::intercept_only(), -0.25, 0.01);
        assert_eq!(rep.pr_debiased, -0.25 + 0.01);
    }

    #[test]
    fn selection_and_ties() {
        let a = RiskReport::new(0.5, ModelSpec::leading(3), -0.3, 0.05);
        let b = RiskReport::new(0.5, ModelSpec::leading(2), -0.3, 0.05);
        assert_eq!(select_model(&[a.clone(), b.clone()]).unwrap(), ModelSpec::leading(2));
        assert_eq!(select_model(std::slice::from_ref(&a)).unwrap(), ModelSpec::leading(3));
        let c = RiskReport::new(0.5, ModelSpec::new(vec![1, 3], true).unwrap(), -0.3, 0.05);
        assert_eq!(select_model(&[c, b.clone()]).unwrap(), ModelSpec::leading(2));
        assert!(select_model(&[]).is_err());
        let d = RiskReport::new(0.8, ModelSpec::leading(1), -0.3, 0.0);
        assert!(select_model(&[a, d]).is_err());
    }

    #[test]
    fn trace_of_identity_sandwich() {
        // Intercept-only with every residual inside the kernel and of one
        // sign: D0 = 1/(2h), D1 = tau^2, so trace = 2 h tau^2.
        let ds = Dataset::new(vec![0.0; 10], Matrix::zeros(10, 1)).unwrap();
        let m = ModelSpec::intercept_only();
        let f = fake_fit(&m, 0.3, vec![0.5; 10]);
        let e = optimism_estimate(&ds, &m, &f, Some(1.0)).unwrap();
        assert!((e.trace - 2.0 * 0.09).abs() < 1e-14);
        assert_eq!(e.b_hat, e.trace / 10.0);
    }

    fn dgp1_fit(seed: u64, n: usize, model: &ModelSpec, tau: f64) -> (Dataset, QuantileFit) {
        let ds = Dgp::new(DgpId::Dgp1, 10).unwrap().sample(n, &RngStream::new(seed, 0)).unwrap();
        let f = fit(&ds, model, tau, &SolverOptions::default()).unwrap();
        (ds, f)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn b_hat_positive_and_scale_free(seed in 0u64..5000, tau in 0.2f64..0.8, c in 0.05f64..20.0) {
            let m = ModelSpec::new(vec![1, 2, 7], true).unwrap();
            let (ds, f) = dgp1_fit(seed, 200, &m, tau);
            let e = optimism_estimate(&ds, &m, &f, None).unwrap();
            prop_assert!(e.b_hat > 0.0);
            prop_assert!(e.d0_min_eig > 0.0 && e.d0_max_eig >= e.d0_min_eig);

            // Scaling predictors rescales theta but leaves residuals alone.
            let scaled = ds.with_scaled_predictors(c);
            let mut fs = f.clone();
            for t in fs.theta.iter_mut().skip(1) {
                *t /= c;
            }
            let es = optimism_estimate(&scaled, &m, &fs, None).unwrap();
            prop_assert!((es.b_hat - e.b_hat).abs() <= 1e-9 * e.b_hat);

            // Trace by unit-vector solves.
            let d0 = d0_hat(&ds, &m, &f, e.bandwidth.c).unwrap();
            let d1 = d1_hat(&ds, &m, &f).unwrap();
            let chol = crate::num::Cholesky::factor(&d0).unwrap();
            let k = m.n_params();
            let mut t = 0.0;
            for j in 0..k {
                let col = d1.column(j);
                t += chol.solve_vec(&col)[j];
            }
            prop_assert!((t - e.trace).abs() <= 1e-8 * e.trace.abs().max(1.0));
        }

        #[test]
        fn nested_refit_never_raises_objective(seed in 0u64..5000, tau in 0.1f64..0.9) {
            let small = ModelSpec::leading(2);
            let big = ModelSpec::new(vec![1, 2, 6], true).unwrap();
            let (ds, fs) = dgp1_fit(seed, 80, &small, tau);
            let fb = fit(&ds, &big, tau, &SolverOptions::default()).unwrap();
            let rs = in_sample_risk(&ds, &small, &fs).unwrap();
            let rb = in_sample_risk(&ds, &big, &fb).unwrap();
            prop_assert!(rb <= rs + 1e-7 * rs.abs().max(1.0));
        }
    }

    #[test]
    fn correct_model_limit_with_true_residuals() {
        // Correct model, true residuals (theta at the CQF), large n.
        let n = 5000;
        let tau = 0.5;
        let m = ModelSpec::leading(4);
        let dgp = Dgp::new(DgpId::Dgp1, 4).unwrap();
        let ds = dgp.sample(n, &RngStream::new(99, 0)).unwrap();
        let x = m.design(&ds).unwrap();
        let theta = vec![2.0 * dgp.noise_quantile(tau).unwrap(), 1.0, 1.0, 1.0, 1.0];
        let residuals: Vec<f64> = (0..n).map(|i| ds.y()[i] - crate::num::linalg::dot(x.row(i), &theta)).collect();
        let f = QuantileFit { residuals, theta, ..fake_fit(&m, tau, vec![]) };
        let e = optimism_estimate(&ds, &m, &f, None).unwrap();
        // tau(1-tau)/f(0) * 5 with f(0) = phi(0)/2.
        let target = 0.25 / (normal_pdf(0.0) / 2.0) * 5.0;
        assert!((e.trace - target).abs() < 0.10 * target, "{} vs {target}", e.trace);
    }
}
