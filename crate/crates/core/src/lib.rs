//! Asymptotic performance prediction for estimation of i.i.d. vectors from
//! large random linear measurements in Gaussian noise, together with a
//! desk-scale Monte Carlo harness that validates the predictions with real
//! vector estimators.
//!
//! The analysis describes each component's estimate by an equivalent scalar
//! channel z = x + sqrt(sigma_eff^2 / s) v followed by a scalar estimator,
//! where the effective noise levels solve a pair of coupled fixed-point
//! equations. Supported estimator families:
//!
//! - regularized linear estimation (LMMSE when gamma equals the true noise),
//! - lasso / basis pursuit denoising (scalar limit: soft thresholding),
//! - zero norm-regularized estimation (scalar limit: hard thresholding;
//!   analysis only, the vector estimator is intractable),
//! - posterior-mean (MMSE) estimation under a postulated prior.
//!
//! Module map:
//!
//! - [`priors`]: source and scale-factor distributions,
//! - [`scalar`]: scalar estimators and their limiting variances,
//! - [`solver`]: fixed-point solvers and the regularization optimizer,
//! - [`metrics`]: predicted MSE, SNR, and support-recovery error,
//! - [`montecarlo`]: seeded vector-estimation experiments (LMMSE, lasso).

pub mod error;
pub mod gaussian;
pub mod metrics;
pub mod montecarlo;
pub mod priors;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use metrics::{
    misdetect_probability, optimize_thresholds, predicted_mse, predicted_mse_weighted, prediction,
    snr_metrics, ReplicaPrediction, SupportRule,
};
pub use priors::{MixtureComponent, Prior, ScaleDist};
pub use scalar::{
    hard_threshold, map_objective, scalar_map, scalar_map_variance, scalar_mmse, scalar_mmse_mse,
    soft_threshold, EstimatorSpec,
};
pub use solver::{
    map_rhs, multiuser_efficiency, optimize_regularization, solve_map_fixed_point,
    solve_mmse_fixed_point, NoiseLevels, ProblemConfig, QuadratureSpec,
};
pub use montecarlo::{
    generate_problem, lasso_estimate, lmmse_estimate, run_experiment, trial_seed, ExperimentOutput,
    ExperimentSummary, LassoOptions, SolverStatus, TrialConfig, TrialResult,
};
