use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration failed at t = {time}: {reason} (state: {state})")]
    Integration {
        time: f64,
        reason: String,
        state: String,
    },

    #[error("Fock truncation too small: top-level population {population:.3e} at dim {dim} (increase dim)")]
    Leakage { dim: usize, population: f64 },

    #[error("steady state is not unique: {0}")]
    DegenerateSteadyState(String),

    #[error("exponential action did not converge (norm {norm:.3e}, dt {dt:.3e})")]
    ExpmConvergence { norm: f64, dt: f64 },

    #[error("singular or ill-conditioned linear system: {0}")]
    Singular(String),

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
