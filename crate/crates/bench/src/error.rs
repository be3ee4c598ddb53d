use fids::FidsError;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl BenchError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 1,
            BenchError::Data(_) | BenchError::Io { .. } => 2,
            BenchError::Invariant(_) => 3,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> BenchError {
        let context = context.into();
        move |source| BenchError::Io { context, source }
    }
}

impl From<FidsError> for BenchError {
    fn from(e: FidsError) -> Self {
        match e {
            FidsError::Argument(_) | FidsError::UnsupportedIndex(_) => BenchError::Usage(e.to_string()),
            _ => BenchError::Data(e.to_string()),
        }
    }
}
