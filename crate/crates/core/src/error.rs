use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped so callers (notably the CLI) can distinguish
/// caller mistakes from runtime failures via [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two operands had incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Not enough data to perform the operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A requested resource estimate exceeded the configured budget.
    #[error("memory budget exceeded: estimated {required} bytes > budget {budget} bytes")]
    MemoryBudget { required: u64, budget: u64 },

    /// The data admits no meaningful answer (e.g. all snapshots identical).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A numerical routine failed or produced non-finite values.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Time integration blew up.
    #[error("numerical instability at step {step}: non-finite state")]
    Instability { step: usize },

    /// A file did not conform to an expected format.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code contract: 1 for usage/validation errors,
    /// 2 for numeric or runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch(_)
            | Error::InsufficientData(_)
            | Error::MemoryBudget { .. } => 1,
            Error::DegenerateData(_)
            | Error::Numeric(_)
            | Error::Instability { .. }
            | Error::Format { .. }
            | Error::Io(_) => 2,
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Numeric(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
