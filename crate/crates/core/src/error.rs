use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid bounds for {name}: lower {lower} > upper {upper}")]
    InvalidBounds { name: &'static str, lower: f64, upper: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected} devices, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no time budget left: reduce floor {reduce_floor} s >= deadline {deadline} s")]
    NoTimeBudget { reduce_floor: f64, deadline: f64 },

    #[error("oracle grid too coarse: no feasible point found")]
    OracleResolution,

    #[error("config error: {0}")]
    Config(String),

    #[error("experiment aborted: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
