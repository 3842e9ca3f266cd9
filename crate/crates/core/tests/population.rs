//! Population-level quantities against independent derivations.

use qrisk::dgp::{Dgp, DgpId};
use qrisk::num::{normal_inv_cdf, trace_solve, Purpose, RngStream};
use qrisk::oracle::{
    closed_form_trace, gaussian_population_coefficients, population_coefficients, population_matrices,
};
use qrisk::qr::score;
use qrisk::ModelSpec;

#[test]
fn gaussian_conditioning_matches_big_sample_fit() {
    for (id, indices, tau) in
        [(DgpId::Dgp1, vec![1, 2], 0.5), (DgpId::Dgp1, vec![2, 5], 0.8), (DgpId::Dgp2, vec![1, 3], 0.3)]
    {
        let dgp = Dgp::new(id, 6).unwrap();
        let m = ModelSpec::new(indices, true).unwrap();
        let exact = gaussian_population_coefficients(&dgp, &m, tau).unwrap();
        let big = population_coefficients(&dgp, &m, tau, 200_000, 1).unwrap();
        for (a, b) in exact.iter().zip(&big) {
            assert!((a - b).abs() < 0.04, "{id} {m} tau {tau}: {exact:?} vs {big:?}");
        }
    }
}

#[test]
fn dgp1_omitted_predictors_widen_the_noise() {
    // y | z1, z2 ~ N(z1 + z2, 4 + 2): intercept sqrt(6) q_tau, slopes 1.
    let dgp = Dgp::new(DgpId::Dgp1, 4).unwrap();
    let theta = gaussian_population_coefficients(&dgp, &ModelSpec::leading(2), 0.8).unwrap();
    let q = normal_inv_cdf(0.8).unwrap();
    assert!((theta[0] - 6f64.sqrt() * q).abs() < 1e-12);
    assert!((theta[1] - 1.0).abs() < 1e-12 && (theta[2] - 1.0).abs() < 1e-12);
}

#[test]
fn closed_form_matches_monte_carlo_matrices() {
    let dgp = Dgp::new(DgpId::Dgp1, 6).unwrap();
    let n = 500;
    for (indices, tau) in [(vec![1, 2, 3, 4], 0.5), (vec![1, 5, 6], 0.8), (vec![], 0.3)] {
        let m = ModelSpec::new(indices, true).unwrap();
        let theta = gaussian_population_coefficients(&dgp, &m, tau).unwrap();
        let (d0, d1) = population_matrices(&dgp, &m, tau, &theta, 200_000, 2).unwrap();
        let mc = trace_solve(&d0, &d1).unwrap() / n as f64;
        let exact = closed_form_trace(&dgp, &m, tau, n).unwrap();
        assert!((mc / exact - 1.0).abs() < 0.02, "{m} tau {tau}: {mc} vs {exact}");
    }
}

#[test]
fn dgp3_location_scale_model_is_linear() {
    // Q(tau | x) = x1 + x2 + x3 + q (1 + 1.5 x4) is linear in x.
    let dgp = Dgp::new(DgpId::Dgp3, 4).unwrap();
    for tau in [0.25, 0.8] {
        let q = normal_inv_cdf(tau).unwrap();
        let theta = population_coefficients(&dgp, &ModelSpec::leading(4), tau, 200_000, 3).unwrap();
        let expect = [q, 1.0, 1.0, 1.0, 1.5 * q];
        for (a, b) in theta.iter().zip(expect) {
            assert!((a - b).abs() < 0.03, "tau {tau}: {theta:?}");
        }
    }
}

#[test]
fn misspecified_population_fit_zeroes_the_score() {
    // First-order condition E[z phi(y - z'theta)] = 0, checked on fresh draws.
    for (id, indices) in [(DgpId::Dgp3, vec![1, 4]), (DgpId::Dgp4, vec![3]), (DgpId::Dgp4, vec![1, 2, 3, 4])] {
        let dgp = Dgp::new(id, 4).unwrap();
        let m = ModelSpec::new(indices, true).unwrap();
        let tau = 0.7;
        let theta = population_coefficients(&dgp, &m, tau, 200_000, 4).unwrap();
        let fresh = dgp.sample(200_000, &RngStream::replication(99, 0, Purpose::Eval)).unwrap();
        let x = m.design(&fresh).unwrap();
        let nf = fresh.n() as f64;
        for j in 0..m.n_params() {
            let v: Vec<f64> = (0..fresh.n())
                .map(|i| {
                    let r = x.row(i);
                    let fitted: f64 = r.iter().zip(&theta).map(|(a, b)| a * b).sum();
                    r[j] * score(fresh.y()[i] - fitted, tau)
                })
                .collect();
            let mean = v.iter().sum::<f64>() / nf;
            let se = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (nf - 1.0) / nf).sqrt();
            // Two independent samples: allow for the error in theta too.
            assert!(mean.abs() < 5.0 * se, "{id} {m} column {j}: {mean} (se {se})");
        }
    }
}
