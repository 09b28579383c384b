use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dispersion parameters: {0}")]
    InvalidDispersion(String),

    #[error("dispersion relation has no passing assumption report")]
    UnverifiedDispersion,

    #[error("dispersion assumptions violated: {0}")]
    AssumptionViolated(String),

    #[error("resonance radius not bracketed within search radius {search_radius}")]
    RootNotBracketed { search_radius: f64 },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("hierarchy level mismatch: expected {expected}, found {found}")]
    LevelMismatch { expected: usize, found: usize },

    #[error("hierarchy level {level} missing (state holds up to {available})")]
    MissingLevel { level: usize, available: usize },

    #[error("mixture weights must be positive and sum to one (sum = {sum})")]
    UnnormalizedWeights { sum: f64 },

    #[error("balance constraints violated: {0}")]
    BalanceViolated(String),

    #[error("step rejected at t = {time}: weighted norm {norm} exceeds guard {limit}")]
    StepRejected { time: f64, norm: f64, limit: f64 },

    #[error("bad field file: {0}")]
    BadFieldFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
