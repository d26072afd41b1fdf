use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("case validation failed: {0}")]
    Case(String),

    #[error("ingestion error at row {row}: {msg}")]
    Ingestion { row: usize, msg: String },

    #[error("enumeration truncated after {yielded} configurations")]
    EnumerationTruncated { yielded: usize },

    #[error("power flow did not converge for scenario {scenario}")]
    Infeasible { scenario: usize },

    #[error("no feasible radial topology among evaluated candidates")]
    NoFeasibleTopology,

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
