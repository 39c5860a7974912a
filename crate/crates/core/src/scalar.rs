//! Scalar equivalent-channel estimators and their limiting variances.
//!
//! These are the building blocks of the fixed-point equations: estimators of
//! a scalar x from z = x + sqrt(mu) v, either cost-minimizing (linear,
//! soft-threshold, hard-threshold) or posterior-mean under a mixture prior.

use crate::error::{Error, Result};
use crate::gaussian::std_normal_pdf;
use crate::priors::Prior;

/// Which vector estimator is being analyzed or simulated.
///
/// `gamma` is the regularization weight of the quadratic data term,
/// `(1/(2 gamma)) ||y - A S^{1/2} x||^2 + sum_j f(x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    /// f(x) = x^2 / 2; the regularized linear (LMMSE when gamma = sigma0^2) estimator.
    Linear { gamma: f64 },
    /// f(x) = |x|; lasso / basis pursuit denoising.
    Lasso { gamma: f64 },
    /// f(x) = 1{x != 0}; zero norm-regularized estimation (analysis only).
    ZeroNorm { gamma: f64 },
    /// Posterior-mean estimation under a postulated prior.
    Mmse { postulated_prior: Prior },
}

/// The three cost-function families with closed-form scalar estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFamily {
    Linear,
    Lasso,
    ZeroNorm,
}

impl EstimatorSpec {
    pub fn linear(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(EstimatorSpec::Linear { gamma })
    }

    pub fn lasso(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(EstimatorSpec::Lasso { gamma })
    }

    pub fn zero_norm(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(EstimatorSpec::ZeroNorm { gamma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Linear { .. } => "linear",
            EstimatorSpec::Lasso { .. } => "lasso",
            EstimatorSpec::ZeroNorm { .. } => "zero_norm",
            EstimatorSpec::Mmse { .. } => "mmse",
        }
    }

    /// Regularization weight, for the MAP families.
    pub fn gamma(&self) -> Option<f64> {
        match self {
            EstimatorSpec::Linear { gamma }
            | EstimatorSpec::Lasso { gamma }
            | EstimatorSpec::ZeroNorm { gamma } => Some(*gamma),
            EstimatorSpec::Mmse { .. } => None,
        }
    }

    pub fn family(&self) -> Option<MapFamily> {
        match self {
            EstimatorSpec::Linear { .. } => Some(MapFamily::Linear),
            EstimatorSpec::Lasso { .. } => Some(MapFamily::Lasso),
            EstimatorSpec::ZeroNorm { .. } => Some(MapFamily::ZeroNorm),
            EstimatorSpec::Mmse { .. } => None,
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        match self {
            EstimatorSpec::Linear { .. } => Self::linear(gamma),
            EstimatorSpec::Lasso { .. } => Self::lasso(gamma),
            EstimatorSpec::ZeroNorm { .. } => Self::zero_norm(gamma),
            EstimatorSpec::Mmse { .. } => Err(Error::UnsupportedEstimator {
                estimator: "mmse",
                operation: "with_gamma",
            }),
        }
    }

    fn require_family(&self, operation: &'static str) -> Result<MapFamily> {
        self.family().ok_or(Error::UnsupportedEstimator {
            estimator: self.name(),
            operation,
        })
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "regularization gamma must be positive and finite, got {gamma}"
        )))
    }
}

/// Soft thresholding: shrink toward zero with dead zone [-lambda, lambda].
pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    debug_assert!(lambda > 0.0);
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Hard thresholding: keep z when |z| > t, zero otherwise.
pub fn hard_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t > 0.0);
    if z.abs() > t {
        z
    } else {
        0.0
    }
}

fn family_estimate(family: MapFamily, z: f64, lambda: f64) -> f64 {
    match family {
        MapFamily::Linear => z / (1.0 + lambda),
        MapFamily::Lasso => soft_threshold(z, lambda),
        MapFamily::ZeroNorm => hard_threshold(z, (2.0 * lambda).sqrt()),
    }
}

/// Scalar MAP estimate: the argmin over x of F(x,z,lambda) = |z-x|^2/(2 lambda) + f(x).
pub fn scalar_map(spec: &EstimatorSpec, z: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(family_estimate(spec.require_family("scalar_map")?, z, lambda))
}

/// Limiting curvature sigma^2(z, lambda) of F at its minimizer.
///
/// Threshold ties (|z| exactly at the dead-zone edge) take the dead-zone
/// branch and report 0.
pub fn scalar_map_variance(spec: &EstimatorSpec, z: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(match spec.require_family("scalar_map_variance")? {
        MapFamily::Linear => lambda / (1.0 + lambda),
        MapFamily::Lasso => {
            if z.abs() > lambda {
                lambda
            } else {
                0.0
            }
        }
        MapFamily::ZeroNorm => {
            if z.abs() > (2.0 * lambda).sqrt() {
                lambda
            } else {
                0.0
            }
        }
    })
}

/// The scalar objective F(x, z, lambda); exposed so tests can probe the
/// argmin property directly.
pub fn map_objective(spec: &EstimatorSpec, x: f64, z: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let penalty = match spec.require_family("map_objective")? {
        MapFamily::Linear => 0.5 * x * x,
        MapFamily::Lasso => x.abs(),
        MapFamily::ZeroNorm => {
            if x != 0.0 {
                1.0
            } else {
                0.0
            }
        }
    };
    Ok((z - x) * (z - x) / (2.0 * lambda) + penalty)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "scalar noise level lambda must be positive and finite, got {lambda}"
        )))
    }
}

/// Posterior mean and second moment of x given z = x + sqrt(mu) v, x ~ prior.
///
/// Component responsibilities are formed in the log domain with
/// max-subtraction, so spike-and-slab priors at high SNR do not underflow.
pub fn posterior_moments(prior: &Prior, z: f64, mu: f64) -> (f64, f64) {
    debug_assert!(mu > 0.0);
    let comps = prior.components();
    let mut logw = Vec::with_capacity(comps.len());
    let mut pmean = Vec::with_capacity(comps.len());
    let mut pm2 = Vec::with_capacity(comps.len());
    let mut max_lw = f64::NEG_INFINITY;
    for c in &comps {
        let nu2 = c.variance + mu;
        let lw = if c.weight > 0.0 {
            c.weight.ln() - 0.5 * nu2.ln() - 0.5 * (z - c.mean) * (z - c.mean) / nu2
        } else {
            f64::NEG_INFINITY
        };
        max_lw = max_lw.max(lw);
        logw.push(lw);
        let shrink = c.variance / nu2;
        let m = c.mean + shrink * (z - c.mean);
        let v = c.variance * mu / nu2;
        pmean.push(m);
        pm2.push(v + m * m);
    }
    let mut norm = 0.0;
    let mut ex = 0.0;
    let mut ex2 = 0.0;
    for i in 0..logw.len() {
        let r = (logw[i] - max_lw).exp();
        norm += r;
        ex += r * pmean[i];
        ex2 += r * pm2[i];
    }
    (ex / norm, ex2 / norm)
}

/// Scalar conditional-mean estimate of x from z = x + sqrt(mu) v.
pub fn scalar_mmse(prior: &Prior, z: f64, mu: f64) -> f64 {
    posterior_moments(prior, z, mu).0
}

/// Conditional MSE of the (possibly mismatched) posterior-mean estimator:
/// E[|x - xhat(z; post_prior, mu_post)|^2 | z] with x | z distributed under
/// (true_prior, mu_true).
pub fn scalar_mmse_mse(
    true_prior: &Prior,
    post_prior: &Prior,
    mu_true: f64,
    mu_post: f64,
    z: f64,
) -> f64 {
    let xhat = scalar_mmse(post_prior, z, mu_post);
    let (ex, ex2) = posterior_moments(true_prior, z, mu_true);
    (ex2 - 2.0 * xhat * ex + xhat * xhat).max(0.0)
}

/// Density of z = x + sqrt(mu) v at `z` under the prior's marginal; used by
/// the solver to weight expectations over the true observation law.
pub fn marginal_pdf(prior: &Prior, z: f64, mu: f64) -> f64 {
    prior
        .components()
        .iter()
        .map(|c| {
            let nu2 = c.variance + mu;
            c.weight * std_normal_pdf((z - c.mean) / nu2.sqrt()) / nu2.sqrt()
        })
        .sum()
}
