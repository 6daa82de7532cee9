use std::path::PathBuf;

/// Errors from file handling and experiment runs.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gridbid_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unsupported schema_version {found} in {path} (expected 1)")]
    Schema { path: PathBuf, found: u32 },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Config(String),
    #[error("cost ordering violated: {0}")]
    Ordering(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for invalid input, 3 for solver failure, 4 for an
    /// ordering violation.
    pub fn exit_code(&self) -> i32 {
        use gridbid_core::Error as C;
        match self {
            Error::Core(C::Solver { .. } | C::NoIncumbent(_) | C::InvalidModel(_)) => 3,
            Error::Ordering(_) => 4,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
