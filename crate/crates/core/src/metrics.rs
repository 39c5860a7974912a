//! Performance numbers derived from solved noise levels: predicted MSE,
//! normalized squared error in dB, support-recovery misdetection with
//! optimized per-scale thresholds, and effective SNRs.

use crate::error::{Error, Result};
use crate::gaussian::prob_abs_exceeds;
use crate::priors::MixtureComponent;
use crate::scalar::{EstimatorSpec, MapFamily};
use crate::solver::{
    map_mse_expectation, mmse_predicted_mse, multiuser_efficiency, NoiseLevels, ProblemConfig,
    QuadratureSpec,
};

/// Per-scale support-detection thresholds t(s): declare a component nonzero
/// when |xhat| > t(s).
#[derive(Debug, Clone, PartialEq)]
pub struct SupportRule {
    /// (scale atom, threshold) in scale-atom order.
    pub thresholds: Vec<(f64, f64)>,
}

impl SupportRule {
    pub fn new(thresholds: Vec<(f64, f64)>) -> Result<Self> {
        for &(s, t) in &thresholds {
            if !(s > 0.0) || !(t >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "support rule needs s > 0 and t >= 0, got ({s}, {t})"
                )));
            }
        }
        Ok(SupportRule { thresholds })
    }

    /// Same threshold at every scale atom of `config`'s scale distribution.
    pub fn uniform(config: &ProblemConfig, t: f64) -> Result<Self> {
        Self::new(config.scale.atoms().iter().map(|&(_, s)| (s, t)).collect())
    }

    /// Threshold for scale value `s` (exact atom match, nearest fallback).
    pub fn threshold_for(&self, s: f64) -> Result<f64> {
        if let Some(&(_, t)) = self.thresholds.iter().find(|&&(a, _)| a == s) {
            return Ok(t);
        }
        self.thresholds
            .iter()
            .min_by(|a, b| (a.0 - s).abs().total_cmp(&(b.0 - s).abs()))
            .filter(|&&(a, _)| (a - s).abs() <= 1e-9 * s.abs().max(a.abs()))
            .map(|&(_, t)| t)
            .ok_or_else(|| Error::InvalidConfig(format!("no threshold for scale {s}")))
    }
}

/// Everything the replica analysis predicts for one configuration.
#[derive(Debug, Clone)]
pub struct ReplicaPrediction {
    pub levels: NoiseLevels,
    /// E|x - xhat|^2, unweighted by the scale factor.
    pub mse: f64,
    /// 10 log10(mse / E|x|^2).
    pub normalized_se_db: f64,
    pub eta: f64,
    /// Side-information SNR at the mean scale factor, in dB.
    pub snr0_db: f64,
    pub p_misdetect: Option<f64>,
    pub thresholds: Option<SupportRule>,
}

/// Unweighted predicted MSE E|x - xhat|^2 under the equivalent scalar model.
pub fn predicted_mse(
    config: &ProblemConfig,
    levels: &NoiseLevels,
    quad: &QuadratureSpec,
) -> Result<f64> {
    predicted_mse_impl(config, levels, quad, false)
}

/// Scale-weighted predicted MSE E[s |x - xhat|^2]; this is the physical
/// squared error when the scale factors carry signal power, and equals
/// (sigma_eff^2 - sigma0^2)/beta at a fixed point.
pub fn predicted_mse_weighted(
    config: &ProblemConfig,
    levels: &NoiseLevels,
    quad: &QuadratureSpec,
) -> Result<f64> {
    predicted_mse_impl(config, levels, quad, true)
}

fn predicted_mse_impl(
    config: &ProblemConfig,
    levels: &NoiseLevels,
    quad: &QuadratureSpec,
    weighted: bool,
) -> Result<f64> {
    quad.validate()?;
    match &config.estimator {
        EstimatorSpec::Mmse { postulated_prior } => {
            mmse_predicted_mse(config, postulated_prior, levels, quad, weighted)
        }
        _ => {
            let family = config.estimator.family().expect("map family");
            Ok(map_mse_expectation(
                &config.prior,
                &config.scale,
                levels.sigma_eff_sq,
                levels.gamma_p,
                family,
                weighted,
            ))
        }
    }
}

/// The event |xhat| > t expressed as |z| > edge(t) for each family.
fn z_threshold(family: MapFamily, lam: f64, t: f64) -> f64 {
    match family {
        MapFamily::Linear => t * (1.0 + lam),
        MapFamily::Lasso => lam + t,
        MapFamily::ZeroNorm => (2.0 * lam).sqrt().max(t),
    }
}

fn misdetect_for_atom(
    components: &[MixtureComponent],
    family: MapFamily,
    mu: f64,
    lam: f64,
    t: f64,
) -> f64 {
    let thr = z_threshold(family, lam, t);
    components
        .iter()
        .map(|c| {
            let p_exceed = prob_abs_exceeds(c.mean, (c.variance + mu).sqrt(), thr);
            // declaring "nonzero" is an error for zero atoms, a miss otherwise
            if c.is_zero_atom() {
                c.weight * p_exceed
            } else {
                c.weight * (1.0 - p_exceed)
            }
        })
        .sum()
}

/// Probability of support misdetection P(thetahat != theta) under the
/// equivalent scalar channel, with per-scale thresholds from `rule`.
pub fn misdetect_probability(
    config: &ProblemConfig,
    levels: &NoiseLevels,
    rule: &SupportRule,
    quad: &QuadratureSpec,
) -> Result<f64> {
    quad.validate()?;
    let family = config.estimator.family().ok_or(Error::UnsupportedEstimator {
        estimator: config.estimator.name(),
        operation: "misdetect_probability",
    })?;
    let comps = config.prior.components();
    let mut p = 0.0;
    for (ws, s) in config.scale.atoms() {
        let t = rule.threshold_for(s)?;
        let mu = levels.sigma_eff_sq / s;
        let lam = levels.gamma_p / s;
        p += ws * misdetect_for_atom(&comps, family, mu, lam, t);
    }
    Ok(p)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Minimize the misdetection probability over the per-scale thresholds.
/// Each scale atom gets an independent 1-D search (multi-start log grid plus
/// golden-section refinement) on [0, 10 sqrt(E|x|^2 + sigma_eff^2/s)].
pub fn optimize_thresholds(
    config: &ProblemConfig,
    levels: &NoiseLevels,
    quad: &QuadratureSpec,
) -> Result<(SupportRule, f64)> {
    quad.validate()?;
    let family = config.estimator.family().ok_or(Error::UnsupportedEstimator {
        estimator: config.estimator.name(),
        operation: "optimize_thresholds",
    })?;
    let comps = config.prior.components();
    let ex2 = config.prior.second_moment();
    let mut rule = Vec::new();
    let mut total = 0.0;
    for (ws, s) in config.scale.atoms() {
        let mu = levels.sigma_eff_sq / s;
        let lam = levels.gamma_p / s;
        let objective = |t: f64| misdetect_for_atom(&comps, family, mu, lam, t);
        let t_max = 10.0 * (ex2 + mu).sqrt();

        let n_grid = 32;
        let mut best_t = 0.0;
        let mut best_v = objective(0.0);
        let mut grid = Vec::with_capacity(n_grid + 1);
        grid.push(0.0);
        for i in 0..n_grid {
            let t = t_max * 1e-4 * (1e4f64).powf(i as f64 / (n_grid - 1) as f64);
            grid.push(t);
            let v = objective(t);
            if v < best_v {
                best_v = v;
                best_t = t;
            }
        }
        // refine around the best grid point
        let idx = grid.iter().position(|&g| g == best_t).unwrap_or(0);
        let lo = if idx == 0 { 0.0 } else { grid[idx - 1] };
        let hi = if idx + 1 < grid.len() { grid[idx + 1] } else { t_max };
        let (t_ref, v_ref) = golden_min(&objective, lo, hi, 80);
        let (t_opt, v_opt) = if v_ref < best_v {
            (t_ref, v_ref)
        } else {
            (best_t, best_v)
        };
        rule.push((s, t_opt));
        total += ws * v_opt;
    }
    Ok((SupportRule::new(rule)?, total))
}

/// Effective SNR with and without interference, per scale atom.
#[derive(Debug, Clone, Copy)]
pub struct ScaleSnr {
    pub s: f64,
    pub snr0_db: f64,
    pub snr_db: f64,
}

/// SNR0(s) = s E|x|^2 / sigma0^2, SNR(s) = s E|x|^2 / sigma_eff^2, and the
/// efficiency eta; SNR(s) = eta * SNR0(s) exactly.
pub fn snr_metrics(config: &ProblemConfig, levels: &NoiseLevels) -> (Vec<ScaleSnr>, f64) {
    let ex2 = config.prior.second_moment();
    let eta = multiuser_efficiency(levels, config.sigma0_sq);
    let per_scale = config
        .scale
        .atoms()
        .iter()
        .map(|&(_, s)| ScaleSnr {
            s,
            snr0_db: 10.0 * (s * ex2 / config.sigma0_sq).log10(),
            snr_db: 10.0 * (s * ex2 / levels.sigma_eff_sq).log10(),
        })
        .collect();
    (per_scale, eta)
}

/// Assemble the full prediction record for one solved configuration.
/// `with_support` adds optimized thresholds and the misdetection probability
/// (cost-minimizing estimators only).
pub fn prediction(
    config: &ProblemConfig,
    levels: &NoiseLevels,
    quad: &QuadratureSpec,
    with_support: bool,
) -> Result<ReplicaPrediction> {
    let mse = predicted_mse(config, levels, quad)?;
    let ex2 = config.prior.second_moment();
    let normalized_se_db = 10.0 * (mse / ex2).log10();
    let eta = multiuser_efficiency(levels, config.sigma0_sq);
    let snr0_db = 10.0 * (config.scale.mean() * ex2 / config.sigma0_sq).log10();
    let (p_misdetect, thresholds) = if with_support {
        let (rule, p) = optimize_thresholds(config, levels, quad)?;
        (Some(p), Some(rule))
    } else {
        (None, None)
    };
    Ok(ReplicaPrediction {
        levels: *levels,
        mse,
        normalized_se_db,
        eta,
        snr0_db,
        p_misdetect,
        thresholds,
    })
}
