//! The four simulation designs and their true conditional quantiles.
//!
//! | id   | response                                   | covariates          | noise        |
//! |------|--------------------------------------------|---------------------|--------------|
//! | DGP1 | x₁+x₂+x₃+x₄+ε                              | N(0, I_p)           | N(0, 4)      |
//! | DGP2 | x₁+x₂+x₃+x₄+ε                              | N(0, Σ), Σᵢⱼ=0.8^|i−j| | N(0, 12.384) |
//! | DGP3 | x₁+x₂+x₃+(1+1.5x₄)ε                        | U([0,2]) i.i.d.     | N(0, 1)      |
//! | DGP4 | x₁+x₂+x₃+4x₃x₄+ε                           | N(0, I_p)           | t₂           |
//!
//! Predictors are the covariates themselves, so a generated [`Dataset`] has
//! `d = p` columns.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::num::student_t::{t2_pdf, t2_quantile, StudentT};
use crate::num::{normal_inv_cdf, normal_pdf, Cholesky, Matrix, RngStream};

pub const DEFAULT_P: usize = 50;
pub const DGP2_NOISE_VARIANCE: f64 = 12.384;
pub const DGP2_RHO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DgpId {
    Dgp1,
    Dgp2,
    Dgp3,
    Dgp4,
}

impl DgpId {
    pub fn number(self) -> u8 {
        match self {
            DgpId::Dgp1 => 1,
            DgpId::Dgp2 => 2,
            DgpId::Dgp3 => 3,
            DgpId::Dgp4 => 4,
        }
    }

    /// Jointly Gaussian designs, where every linear model is a location model.
    pub fn is_gaussian(self) -> bool {
        matches!(self, DgpId::Dgp1 | DgpId::Dgp2)
    }
}

impl fmt::Display for DgpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for DgpId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_start_matches("dgp") {
            "1" => Ok(DgpId::Dgp1),
            "2" => Ok(DgpId::Dgp2),
            "3" => Ok(DgpId::Dgp3),
            "4" => Ok(DgpId::Dgp4),
            _ => Err(Error::InvalidInput(format!("unknown DGP {s:?} (expected 1-4)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DgpSpec {
    pub id: DgpId,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(id: DgpId, n: usize, seed: u64) -> Self {
        Self { id, n, p: DEFAULT_P, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if self.p < 4 {
            return Err(Error::InvalidInput(format!("p must be at least 4, got {}", self.p)));
        }
        Ok(())
    }
}

/// A sampler for one design at a fixed covariate dimension.
#[derive(Debug, Clone)]
pub struct Dgp {
    id: DgpId,
    p: usize,
    sigma: Option<Cholesky>,
}

const LANE_COVARIATES: u64 = 0;
const LANE_NOISE: u64 = 1;
const LANE_NOISE_CHI: u64 = 2;

impl Dgp {
    pub fn new(id: DgpId, p: usize) -> Result<Self> {
        if p < 4 {
            return Err(Error::InvalidInput(format!("p must be at least 4, got {p}")));
        }
        let sigma = match id {
            DgpId::Dgp2 => Some(Cholesky::factor(&dgp2_covariance(p))?),
            _ => None,
        };
        Ok(Self { id, p, sigma })
    }

    pub fn id(&self) -> DgpId {
        self.id
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `n` observations drawn from `stream`.
    pub fn sample(&self, n: usize, stream: &RngStream) -> Result<Dataset> {
        let p = self.p;
        let mut cov_rng = stream.lane(LANE_COVARIATES);
        let mut z = Vec::with_capacity(n * p);
        let mut g = vec![0.0; p];
        for _ in 0..n {
            match self.id {
                DgpId::Dgp1 | DgpId::Dgp4 => {
                    z.extend((0..p).map(|_| -> f64 { StandardNormal.sample(&mut cov_rng) }));
                }
                DgpId::Dgp2 => {
                    g.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut cov_rng));
                    let chol = self.sigma.as_ref().expect("DGP2 carries its factor");
                    z.extend(chol.correlate(&g));
                }
                DgpId::Dgp3 => {
                    z.extend((0..p).map(|_| 2.0 * cov_rng.random::<f64>()));
                }
            }
        }
        let z = Matrix::new(n, p, z)?;
        let noise = self.noise(n, stream)?;
        let y = (0..n).map(|i| self.location(z.row(i)) + self.scale(z.row(i)) * noise[i]).collect();
        Dataset::new(y, z)
    }

    fn noise(&self, n: usize, stream: &RngStream) -> Result<Vec<f64>> {
        if self.id == DgpId::Dgp4 {
            let mut t = StudentT::new(2.0, stream, LANE_NOISE, LANE_NOISE_CHI)?;
            return Ok((0..n).map(|_| t.next_draw()).collect());
        }
        let mut rng = stream.lane(LANE_NOISE);
        Ok((0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
    }

    /// Part of the response that does not involve the noise.
    pub fn location(&self, x: &[f64]) -> f64 {
        match self.id {
            DgpId::Dgp1 | DgpId::Dgp2 => x[0] + x[1] + x[2] + x[3],
            DgpId::Dgp3 => x[0] + x[1] + x[2],
            DgpId::Dgp4 => x[0] + x[1] + x[2] + 4.0 * x[2] * x[3],
        }
    }

    /// Multiplier of the standardized noise; positive for every design
    /// (DGP3 covariates live in [0, 2], so 1 + 1.5 x₄ ≥ 1).
    pub fn scale(&self, x: &[f64]) -> f64 {
        match self.id {
            DgpId::Dgp1 => 2.0,
            DgpId::Dgp2 => DGP2_NOISE_VARIANCE.sqrt(),
            DgpId::Dgp3 => 1.0 + 1.5 * x[3],
            DgpId::Dgp4 => 1.0,
        }
    }

    /// τ-quantile of the standardized noise.
    pub fn noise_quantile(&self, tau: f64) -> Result<f64> {
        match self.id {
            DgpId::Dgp4 => t2_quantile(tau),
            _ => normal_inv_cdf(tau),
        }
    }

    pub fn noise_pdf(&self, u: f64) -> f64 {
        match self.id {
            DgpId::Dgp4 => t2_pdf(u),
            _ => normal_pdf(u),
        }
    }

    /// Conditional density of the response given the covariates.
    pub fn conditional_density(&self, x: &[f64], y: f64) -> f64 {
        let s = self.scale(x);
        self.noise_pdf((y - self.location(x)) / s) / s
    }

    pub fn true_cqf(&self, x: &[f64], tau: f64) -> Result<f64> {
        if x.len() < 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: x.len() });
        }
        Ok(self.location(x) + self.scale(x) * self.noise_quantile(tau)?)
    }

    /// Covariance of the covariates (Gaussian designs only).
    pub fn covariate_covariance(&self) -> Result<Matrix> {
        match self.id {
            DgpId::Dgp1 => Ok(Matrix::identity(self.p)),
            DgpId::Dgp2 => Ok(dgp2_covariance(self.p)),
            _ => Err(Error::Unsupported(format!("DGP{} covariates are not Gaussian", self.id))),
        }
    }

    /// Variance of the additive noise (Gaussian designs only).
    pub fn noise_variance(&self) -> Result<f64> {
        match self.id {
            DgpId::Dgp1 => Ok(4.0),
            DgpId::Dgp2 => Ok(DGP2_NOISE_VARIANCE),
            _ => Err(Error::Unsupported(format!("DGP{} noise is not additive Gaussian", self.id))),
        }
    }
}

pub fn dgp2_covariance(p: usize) -> Matrix {
    let mut s = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            s[(i, j)] = DGP2_RHO.powi((i as i32 - j as i32).abs());
        }
    }
    s
}

/// Dataset for `spec`, drawn from stream `(spec.seed, 0)`.
pub fn sample(spec: &DgpSpec) -> Result<Dataset> {
    spec.validate()?;
    Dgp::new(spec.id, spec.p)?.sample(spec.n, &RngStream::new(spec.seed, 0))
}

/// True conditional τ-quantile of the response at covariates `x`.
pub fn true_cqf(id: DgpId, x: &[f64], tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(tau));
    }
    Dgp::new(id, x.len().max(4))?.true_cqf(x, tau)
}
