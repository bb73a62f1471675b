//! Continuous marginal loss distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Probabilities closer than this to 0 or 1 are pulled in by [`BoundaryPolicy::Clamp`].
pub const QUANTILE_CLAMP: f64 = 1e-12;

/// What `quantile` does with probabilities on or near the edge of (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPolicy {
    /// Reject anything outside the open interval.
    Strict,
    /// Map 0 and 1 onto the support endpoints.
    Endpoints,
    /// Clamp into `[1e-12, 1 - 1e-12]` before inverting.
    Clamp,
}

/// The four evaluations the sampler and the curvature diagnostic need.
pub trait Marginal {
    fn cdf(&self, x: f64) -> f64;

    /// `1 - cdf(x)`, computed without cancellation in the upper tail.
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Quantile for an interior probability; `p` is assumed to lie in (0, 1).
    fn quantile_unchecked(&self, p: f64) -> f64;

    fn pdf(&self, x: f64) -> f64;

    fn pdf_prime(&self, x: f64) -> f64;

    /// Lower and upper support endpoints.
    fn support(&self) -> (f64, f64);

    fn quantile(&self, p: f64) -> Result<f64> {
        self.quantile_with(p, BoundaryPolicy::Strict)
    }

    fn quantile_with(&self, p: f64, policy: BoundaryPolicy) -> Result<f64> {
        if p.is_nan() || !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityDomain(p));
        }
        match policy {
            BoundaryPolicy::Strict => {
                if p == 0.0 || p == 1.0 {
                    return Err(Error::ProbabilityDomain(p));
                }
                Ok(self.quantile_unchecked(p))
            }
            BoundaryPolicy::Endpoints => {
                let (lo, hi) = self.support();
                Ok(if p == 0.0 {
                    lo
                } else if p == 1.0 {
                    hi
                } else {
                    self.quantile_unchecked(p)
                })
            }
            BoundaryPolicy::Clamp => {
                Ok(self.quantile_unchecked(p.clamp(QUANTILE_CLAMP, 1.0 - QUANTILE_CLAMP)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormal {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "log-normal needs finite mu and sigma > 0 (got mu={mu}, sigma={sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }

    #[inline]
    fn z(&self, x: f64) -> f64 {
        (x.ln() - self.mu) / self.sigma
    }
}

impl Marginal for LogNormal {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            normal::cdf(self.z(x))
        }
    }

    fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            normal::sf(self.z(x))
        }
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        (self.mu + self.sigma * normal::quantile(p)).exp()
    }

    fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        normal::pdf(self.z(x)) / (x * self.sigma)
    }

    fn pdf_prime(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        // d/dx of φ(z)/(xσ) with z = (ln x − μ)/σ
        -self.pdf(x) / x * (1.0 + self.z(x) / self.sigma)
    }

    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

/// Config-facing marginal; new families become new variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MarginalModel {
    #[serde(rename = "lognormal")]
    LogNormal(LogNormal),
}

impl MarginalModel {
    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        LogNormal::new(mu, sigma).map(MarginalModel::LogNormal)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MarginalModel::LogNormal(ln) => LogNormal::new(ln.mu, ln.sigma).map(|_| ()),
        }
    }
}

impl Marginal for MarginalModel {
    #[inline]
    fn cdf(&self, x: f64) -> f64 {
        match self {
            MarginalModel::LogNormal(m) => m.cdf(x),
        }
    }

    #[inline]
    fn sf(&self, x: f64) -> f64 {
        match self {
            MarginalModel::LogNormal(m) => m.sf(x),
        }
    }

    #[inline]
    fn quantile_unchecked(&self, p: f64) -> f64 {
        match self {
            MarginalModel::LogNormal(m) => m.quantile_unchecked(p),
        }
    }

    #[inline]
    fn pdf(&self, x: f64) -> f64 {
        match self {
            MarginalModel::LogNormal(m) => m.pdf(x),
        }
    }

    #[inline]
    fn pdf_prime(&self, x: f64) -> f64 {
        match self {
            MarginalModel::LogNormal(m) => m.pdf_prime(x),
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            MarginalModel::LogNormal(m) => m.support(),
        }
    }
}

/// Quantile used in the sampling hot paths: boundary probabilities are clamped.
#[inline]
pub fn loss_quantile<M: Marginal>(m: &M, p: f64) -> f64 {
    m.quantile_unchecked(p.clamp(QUANTILE_CLAMP, 1.0 - QUANTILE_CLAMP))
}

/// The marginals used in the case studies: `LN(10 - 0.1 i, 1 + 0.2 i)`, `i = 1..=d`.
pub fn case_study_marginals(dim: usize) -> Vec<MarginalModel> {
    (1..=dim)
        .map(|i| MarginalModel::LogNormal(LogNormal { mu: 10.0 - 0.1 * i as f64, sigma: 1.0 + 0.2 * i as f64 }))
        .collect()
}
