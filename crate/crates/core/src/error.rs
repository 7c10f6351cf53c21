use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cross-entropy target must be 0 or 1, got {0}")]
    NonBinaryTarget(f64),

    #[error("non-finite value encountered during {context}")]
    NonFinite { context: String },

    #[error("training diverged for grid index {grid_index} at epoch {epoch}")]
    Diverged { grid_index: usize, epoch: usize },

    #[error("all grid points diverged; nothing to select")]
    AllDiverged,

    #[error("dataset too small: need {needed} samples, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("sliding window needs series length > window length (T={series_len}, p={window})")]
    EmptyWindowSet { series_len: usize, window: usize },

    #[error("IDX format error in {path}: {detail}")]
    IdxFormat { path: String, detail: String },

    #[error("missing true_mean on dataset; oracle loss is undefined")]
    MissingTrueMean,

    #[error("replication {replication_id} failed: {source}")]
    Replication {
        replication_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
