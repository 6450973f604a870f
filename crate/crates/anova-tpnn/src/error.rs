use thiserror::Error;

/// Broad failure class, used by the CLI to pick an exit code.
///
/// `Usage` maps to exit code 1, `Data` to 2 and `Numeric` to 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("target column '{0}' not found")]
    TargetColumnNotFound(String),

    #[error("cell at row {row}, column '{column}' is not a finite number: '{value}'")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("feature count mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("model file checksum mismatch")]
    ChecksumMismatch,

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorCategory::Usage,
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::TargetColumnNotFound(_)
            | Error::BadCell { .. }
            | Error::Data(_)
            | Error::ArityMismatch { .. }
            | Error::ModelFile(_)
            | Error::SchemaVersion { .. }
            | Error::ChecksumMismatch => ErrorCategory::Data,
            Error::Numeric(_) => ErrorCategory::Numeric,
        }
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Usage => 1,
            ErrorCategory::Data => 2,
            ErrorCategory::Numeric => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
