use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("vector ({x}, {y}, {z}) is not a unit vector")]
    NotUnit { x: f64, y: f64, z: f64 },

    #[error("value {0} is not finite")]
    NonFinite(f64),

    #[error("angle out of range: {0}")]
    AngleOutOfRange(String),

    #[error("invalid watch: {0}")]
    InvalidWatch(String),

    #[error("negative time of flight {0}")]
    NegativeDelay(f64),

    #[error("rejection sampler exceeded {0} proposals")]
    SamplerFailure(usize),

    #[error("protocol integrity violated: {0}")]
    ProtocolIntegrity(String),

    #[error("empty count table")]
    EmptyTable,

    #[error("mismatched tables: {0}")]
    MismatchedTables(String),

    #[error("quadrature did not converge: estimated error {error:e} exceeds {tolerance:e}")]
    Quadrature { error: f64, tolerance: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
