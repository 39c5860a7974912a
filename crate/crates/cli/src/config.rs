//! Experiment-file schema and its resolution into solver configurations.
//!
//! An experiment file is a JSON document with a `schema_version`, a list of
//! experiments, and for each experiment a base problem description, a sweep
//! over one parameter (beta, gamma, or snr0_db), an optional Monte Carlo
//! section, and output routing.

use crate::CliError;
use replica_cs::{
    EstimatorSpec, LassoOptions, Prior, ProblemConfig, ScaleDist, SupportRule, TrialConfig,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub schema_version: String,
    pub experiments: Vec<ExperimentDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentDef {
    pub name: String,
    pub prior: PriorDef,
    #[serde(default)]
    pub scale: Option<ScaleDef>,
    pub estimator: EstimatorDef,
    /// Base measurement ratio; required unless the sweep covers beta.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Exactly one of sigma0_sq / snr0_db unless the sweep covers snr0_db.
    #[serde(default)]
    pub sigma0_sq: Option<f64>,
    #[serde(default)]
    pub snr0_db: Option<f64>,
    /// Power variations known to the estimator. When false the scale folds
    /// into the prior (both for predictions and simulation) and the scale
    /// matrix is the identity.
    #[serde(default = "default_true")]
    pub scale_known: bool,
    /// Optimize per-scale support thresholds and report misdetection.
    #[serde(default)]
    pub support_recovery: bool,
    pub sweep: SweepDef,
    #[serde(default)]
    pub montecarlo: Option<MonteCarloDef>,
    #[serde(default)]
    pub outputs: Vec<OutputDef>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorDef {
    BernoulliGaussian { rho: f64 },
    ThreePoint { rho: f64 },
    Gaussian { var: f64 },
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleDef {
    Constant { s: f64 },
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
    UniformDb { range_db: f64, n_atoms: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorDef {
    Linear { gamma: GammaDef },
    Lasso { gamma: GammaDef },
    ZeroNorm { gamma: GammaDef },
    Mmse {},
}

/// Regularization setting: a number, the true noise level, or MSE-optimal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaDef {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMode {
    Fixed,
    Sigma0,
    Optimal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepDef {
    /// One of "beta", "gamma", "snr0_db".
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloDef {
    pub n: usize,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Sweep points to simulate; defaults to the full sweep.
    #[serde(default)]
    pub sweep_values: Option<Vec<f64>>,
    #[serde(default)]
    pub lasso_tol: Option<f64>,
    #[serde(default)]
    pub lasso_max_iter: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputDef {
    /// One of "prediction", "summary", "trials", "cdf".
    pub metric: String,
    pub path: String,
}

pub const OUTPUT_METRICS: [&str; 4] = ["prediction", "summary", "trials", "cdf"];

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ExperimentFile = serde_json::from_str(text)
            .map_err(|e| CliError::config(format!("experiment file parse error: {e}")))?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "unsupported schema_version `{}` (expected `{SCHEMA_VERSION}`)",
                self.schema_version
            )));
        }
        if self.experiments.is_empty() {
            return Err(CliError::config("no experiments in file".into()));
        }
        for exp in &self.experiments {
            exp.validate()?;
        }
        Ok(())
    }
}

impl ExperimentDef {
    fn validate(&self) -> Result<(), CliError> {
        let ctx = |msg: String| CliError::config(format!("experiment `{}`: {msg}", self.name));
        match self.sweep.parameter.as_str() {
            "beta" | "gamma" | "snr0_db" => {}
            other => {
                return Err(ctx(format!(
                    "sweep.parameter `{other}` not one of beta|gamma|snr0_db"
                )))
            }
        }
        if self.sweep.values.is_empty() {
            return Err(ctx("sweep.values is empty".into()));
        }
        if !self.sweep.values.windows(2).all(|w| w[0] < w[1]) {
            return Err(ctx("sweep.values must be strictly increasing".into()));
        }
        if self.sweep.parameter != "beta" && self.beta.is_none() {
            return Err(ctx("beta required unless swept".into()));
        }
        if self.sweep.parameter != "snr0_db" {
            match (self.sigma0_sq, self.snr0_db) {
                (Some(_), Some(_)) => {
                    return Err(ctx("specify only one of sigma0_sq, snr0_db".into()))
                }
                (None, None) => return Err(ctx("one of sigma0_sq, snr0_db required".into())),
                _ => {}
            }
        }
        if self.sweep.parameter == "gamma" {
            match self.gamma_mode()? {
                GammaMode::Fixed => {}
                _ => return Err(ctx("gamma sweep requires a numeric estimator gamma".into())),
            }
        }
        self.gamma_mode().map_err(|e| ctx(e.message()))?;
        self.build_prior().map_err(|e| ctx(e.message()))?;
        self.build_scale().map_err(|e| ctx(e.message()))?;
        if let Some(mc) = &self.montecarlo {
            if mc.n == 0 || mc.n_trials == 0 {
                return Err(ctx("montecarlo.n and n_trials must be >= 1".into()));
            }
            if let Some(values) = &mc.sweep_values {
                for v in values {
                    if !self.sweep.values.iter().any(|s| s == v) {
                        return Err(ctx(format!(
                            "montecarlo.sweep_values entry {v} not in sweep.values"
                        )));
                    }
                }
            }
            if matches!(self.estimator, EstimatorDef::ZeroNorm { .. } | EstimatorDef::Mmse {}) {
                return Err(ctx(format!(
                    "estimator `{}` cannot be simulated; remove the montecarlo section",
                    self.estimator_name()
                )));
            }
        }
        for out in &self.outputs {
            if !OUTPUT_METRICS.contains(&out.metric.as_str()) {
                return Err(ctx(format!(
                    "output metric `{}` not one of {:?}",
                    out.metric, OUTPUT_METRICS
                )));
            }
            if out.path.is_empty() {
                return Err(ctx("output path is empty".into()));
            }
        }
        Ok(())
    }

    pub fn estimator_name(&self) -> &'static str {
        match self.estimator {
            EstimatorDef::Linear { .. } => "linear",
            EstimatorDef::Lasso { .. } => "lasso",
            EstimatorDef::ZeroNorm { .. } => "zero_norm",
            EstimatorDef::Mmse {} => "mmse",
        }
    }

    pub fn gamma_mode(&self) -> Result<GammaMode, CliError> {
        let g = match &self.estimator {
            EstimatorDef::Linear { gamma }
            | EstimatorDef::Lasso { gamma }
            | EstimatorDef::ZeroNorm { gamma } => gamma,
            EstimatorDef::Mmse {} => return Ok(GammaMode::Fixed),
        };
        match g {
            GammaDef::Fixed(v) => {
                if *v > 0.0 {
                    Ok(GammaMode::Fixed)
                } else {
                    Err(CliError::config(format!("gamma must be positive, got {v}")))
                }
            }
            GammaDef::Named(name) => match name.as_str() {
                "sigma0" => Ok(GammaMode::Sigma0),
                "optimal" => {
                    if matches!(self.estimator, EstimatorDef::Linear { .. }) {
                        Err(CliError::config(
                            "gamma `optimal` applies to lasso/zero_norm only".into(),
                        ))
                    } else {
                        Ok(GammaMode::Optimal)
                    }
                }
                other => Err(CliError::config(format!(
                    "gamma `{other}` not a number, `sigma0`, or `optimal`"
                ))),
            },
        }
    }

    pub fn fixed_gamma(&self) -> Option<f64> {
        match &self.estimator {
            EstimatorDef::Linear { gamma }
            | EstimatorDef::Lasso { gamma }
            | EstimatorDef::ZeroNorm { gamma } => match gamma {
                GammaDef::Fixed(v) => Some(*v),
                GammaDef::Named(_) => None,
            },
            EstimatorDef::Mmse {} => None,
        }
    }

    pub fn build_prior(&self) -> Result<Prior, CliError> {
        let p = match &self.prior {
            PriorDef::BernoulliGaussian { rho } => Prior::bernoulli_gaussian(*rho),
            PriorDef::ThreePoint { rho } => Prior::three_point(*rho),
            PriorDef::Gaussian { var } => Prior::gaussian(*var),
            PriorDef::Discrete { atoms, weights } => {
                if atoms.len() != weights.len() {
                    return Err(CliError::config(
                        "discrete prior: atoms and weights lengths differ".into(),
                    ));
                }
                Prior::discrete(weights.iter().copied().zip(atoms.iter().copied()).collect())
            }
        };
        p.map_err(|e| CliError::config(e.to_string()))
    }

    pub fn build_scale(&self) -> Result<ScaleDist, CliError> {
        let s = match &self.scale {
            None => ScaleDist::constant(1.0),
            Some(ScaleDef::Constant { s }) => ScaleDist::constant(*s),
            Some(ScaleDef::Discrete { atoms, weights }) => {
                if atoms.len() != weights.len() {
                    return Err(CliError::config(
                        "discrete scale: atoms and weights lengths differ".into(),
                    ));
                }
                ScaleDist::discrete(weights.iter().copied().zip(atoms.iter().copied()).collect())
            }
            Some(ScaleDef::UniformDb { range_db, n_atoms }) => {
                ScaleDist::uniform_db(*range_db, *n_atoms)
            }
        };
        s.map_err(|e| CliError::config(e.to_string()))
    }

    /// Sweep points the Monte Carlo section covers.
    pub fn montecarlo_values(&self) -> Vec<f64> {
        match &self.montecarlo {
            Some(mc) => mc
                .sweep_values
                .clone()
                .unwrap_or_else(|| self.sweep.values.clone()),
            None => Vec::new(),
        }
    }
}

/// A fully resolved sweep point, ready for the solver.
pub struct ResolvedPoint {
    pub sweep_value: f64,
    /// Post-folding problem configuration (estimator gamma may be a
    /// placeholder when the mode is `Optimal`).
    pub config: ProblemConfig,
    pub gamma_mode: GammaMode,
    /// Report the scale-weighted (physical) squared error.
    pub weighted: bool,
    pub support: bool,
}

/// Resolve one sweep point into solver inputs: apply the swept parameter,
/// derive sigma0^2 from SNR0 when requested, and fold unknown power
/// variations into the prior.
pub fn resolve_point(exp: &ExperimentDef, sweep_value: f64) -> Result<ResolvedPoint, CliError> {
    let ctx = |msg: String| CliError::config(format!("experiment `{}`: {msg}", exp.name));
    let beta = if exp.sweep.parameter == "beta" {
        sweep_value
    } else {
        exp.beta.expect("validated")
    };
    let prior0 = exp.build_prior()?;
    let scale0 = exp.build_scale()?;
    let sigma0_sq = if exp.sweep.parameter == "snr0_db" {
        snr_to_sigma0(&prior0, &scale0, sweep_value)
    } else if let Some(s) = exp.sigma0_sq {
        s
    } else {
        snr_to_sigma0(&prior0, &scale0, exp.snr0_db.expect("validated"))
    };

    // unknown power variations fold into the prior for analysis and simulation
    let (prior, scale) = if exp.scale_known {
        (prior0, scale0)
    } else {
        let folded = prior0.scaled_by(&scale0);
        (folded, ScaleDist::constant(1.0).map_err(|e| ctx(e.to_string()))?)
    };
    let weighted = exp.scale_known && !matches!(scale, ScaleDist::Constant(_));

    let gamma_mode = exp.gamma_mode()?;
    let gamma_value = if exp.sweep.parameter == "gamma" {
        sweep_value
    } else {
        match gamma_mode {
            GammaMode::Fixed => exp.fixed_gamma().unwrap_or(1.0),
            GammaMode::Sigma0 => sigma0_sq,
            GammaMode::Optimal => 1.0, // placeholder until optimized
        }
    };
    let estimator = match &exp.estimator {
        EstimatorDef::Linear { .. } => EstimatorSpec::linear(gamma_value),
        EstimatorDef::Lasso { .. } => EstimatorSpec::lasso(gamma_value),
        EstimatorDef::ZeroNorm { .. } => EstimatorSpec::zero_norm(gamma_value),
        EstimatorDef::Mmse {} => Ok(EstimatorSpec::Mmse {
            postulated_prior: prior.clone(),
        }),
    }
    .map_err(|e| ctx(e.to_string()))?;

    let config = ProblemConfig::new(beta, sigma0_sq, prior, scale, estimator)
        .map_err(|e| ctx(e.to_string()))?;
    Ok(ResolvedPoint {
        sweep_value,
        config,
        gamma_mode,
        weighted,
        support: exp.support_recovery,
    })
}

fn snr_to_sigma0(prior: &Prior, scale: &ScaleDist, snr0_db: f64) -> f64 {
    scale.mean() * prior.second_moment() / 10f64.powf(snr0_db / 10.0)
}

/// Build the Monte Carlo trial configuration for one resolved point.
/// `gamma` is the final regularization (after any optimization) and
/// `support_rule` the thresholds from the prediction side.
pub fn build_trial_config(
    exp: &ExperimentDef,
    point: &ResolvedPoint,
    gamma: f64,
    seed_override: Option<u64>,
    support_rule: Option<SupportRule>,
) -> Result<TrialConfig, CliError> {
    let mc = exp
        .montecarlo
        .as_ref()
        .ok_or_else(|| CliError::config(format!("experiment `{}` has no montecarlo section", exp.name)))?;
    let estimator = match &exp.estimator {
        EstimatorDef::Linear { .. } => EstimatorSpec::linear(gamma),
        EstimatorDef::Lasso { .. } => EstimatorSpec::lasso(gamma),
        other => {
            return Err(CliError::config(format!(
                "estimator `{:?}` cannot be simulated",
                other
            )))
        }
    }
    .map_err(|e| CliError::config(e.to_string()))?;
    let mut lasso = LassoOptions::default();
    if let Some(t) = mc.lasso_tol {
        lasso.tol = t;
    }
    if let Some(mi) = mc.lasso_max_iter {
        lasso.max_iter = mi;
    }
    Ok(TrialConfig {
        n: mc.n,
        beta: point.config.beta,
        // original (pre-folding) distributions; the harness folds internally
        prior: exp.build_prior()?,
        scale: exp.build_scale()?,
        sigma0_sq: point.config.sigma0_sq,
        estimator,
        scale_known: exp.scale_known,
        master_seed: seed_override.unwrap_or(mc.master_seed),
        n_trials: mc.n_trials,
        lasso,
        support_rule,
    })
}
