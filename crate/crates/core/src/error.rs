use thiserror::Error;

/// Unified error type for the core library.
///
/// Ingest errors carry enough location detail (row, column, record id) to fix
/// the offending cell without re-running under a debugger; solver errors carry
/// the residual that refused to shrink.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}, column `{column}`: {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("record `{record}`: {message}")]
    Record { record: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown hyperparameter `{key}` for family `{family}`")]
    UnknownHyperparameter { family: String, key: String },

    #[error("learner `{family}` does not expose feature importances")]
    NoImportances { family: String },

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: String, detail: String },

    #[error("schema fingerprint mismatch: model trained on {expected}, asked to predict {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("model export: {0}")]
    Export(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
