use thiserror::Error;

/// Errors produced by the prediction and simulation routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A distribution was constructed with invalid parameters.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A problem or trial configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The requested operation does not apply to this estimator family.
    #[error("estimator `{estimator}` is not supported by {operation}")]
    UnsupportedEstimator {
        estimator: &'static str,
        operation: &'static str,
    },

    /// No initialization of the fixed-point iteration converged.
    #[error(
        "fixed-point iteration did not converge: best residual {best_residual:.3e} \
         after {iterations} iterations"
    )]
    NoConvergence {
        best_residual: f64,
        iterations: usize,
    },

    /// The tail-probability constraint rules out every regularization level.
    #[error("no feasible regularization: tail constraint beta*P(|z|>gamma_p/s) < 1 cannot be met")]
    NoFeasibleRegularization,

    /// A linear system was too ill-conditioned to solve reliably.
    #[error("linear system ill-conditioned: condition estimate {condition:.3e}")]
    IllConditioned { condition: f64 },

    /// Numerical integration produced a non-finite value.
    #[error("quadrature failure: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;
