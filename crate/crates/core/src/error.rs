use thiserror::Error;

/// Errors surfaced by the simulation and mean-field layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mode count {count} exceeds the safety limit {limit}; raise the limit explicitly if intended")]
    ModeLimit { count: usize, limit: usize },

    #[error("time step too large: {0}")]
    StepTooLarge(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureDiverged(String),

    #[error("no self-consistent branch found: {0}")]
    NoBranch(String),

    #[error("sampler did not reach stationarity: {0}")]
    NonStationary(String),

    #[error("proposal tuning failed: acceptance rate {0:.3} outside [0.05, 0.8]")]
    TuningFailed(f64),

    #[error("histogram binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("malformed table: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
