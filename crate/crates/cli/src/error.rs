use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark spec: {0}")]
    Spec(String),

    #[error("slope fit needs at least 3 distinct lengths, got {0}")]
    TooFewPoints(usize),

    #[error("slope fit mixes kinds `{first}` and `{other}`")]
    MixedKinds { first: String, other: String },

    #[error("malformed CSV row {row}: {reason}")]
    Parse { row: usize, reason: String },

    #[error(transparent)]
    Core(#[from] lbla_core::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
