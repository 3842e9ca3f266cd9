//! Student-t sampling and the closed-form two-degree-of-freedom law.

use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::rng::RngStream;
use crate::error::{Error, Result};

/// Draws `Z / sqrt(V / df)` with `Z` and `V ~ chi2(df)` taken from two
/// separate lanes of the same stream.
#[derive(Debug, Clone)]
pub struct StudentT {
    df: f64,
    chi: ChiSquared<f64>,
    normal_lane: ChaCha8Rng,
    chi_lane: ChaCha8Rng,
}

impl StudentT {
    pub fn new(df: f64, stream: &RngStream, normal_lane: u64, chi_lane: u64) -> Result<Self> {
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::InvalidInput(format!("degrees of freedom must be positive, got {df}")));
        }
        let chi = ChiSquared::new(df).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(Self { df, chi, normal_lane: stream.lane(normal_lane), chi_lane: stream.lane(chi_lane) })
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn next_draw(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.normal_lane);
        let v = self.chi.sample(&mut self.chi_lane);
        z / (v / self.df).sqrt()
    }
}

/// `count` Student-t draws from lanes 0 and 1 of `stream`.
pub fn sample_student_t(df: f64, stream: &RngStream, count: usize) -> Result<Vec<f64>> {
    let mut t = StudentT::new(df, stream, 0, 1)?;
    Ok((0..count).map(|_| t.next_draw()).collect())
}

pub fn t2_pdf(t: f64) -> f64 {
    (2.0 + t * t).powf(-1.5)
}

pub fn t2_cdf(t: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    0.5 + t / (2.0 * (2.0 + t * t).sqrt())
}

/// Quantile of t₂: `(2p - 1) / sqrt(2 p (1 - p))`.
pub fn t2_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(p));
    }
    Ok((2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt())
}
