use thiserror::Error;

pub type Result<T> = std::result::Result<T, FidsError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FidsError {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("cannot impute column `{column}`: it has no present values")]
    Imputation { column: String },

    #[error("cannot encode column `{column}`, row {row}: unknown value `{value}`")]
    Encoding {
        column: String,
        row: usize,
        value: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("the `{0}` metric cannot be served by a KD-tree index")]
    UnsupportedIndex(&'static str),

    #[error("degenerate forest: no sample is out-of-bag for any tree; raise the number of trees")]
    DegenerateForest,

    #[error("every feature weight clamped to zero; use an importance floor above zero")]
    DegenerateWeights,

    #[error("model format error at line {line}: {message}")]
    Format { line: usize, message: String },
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(FidsError::Argument(msg.into()))
}
