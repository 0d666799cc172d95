use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("experiment '{experiment}' failed: {source}")]
    Runtime {
        experiment: String,
        #[source]
        source: ncwwlab_core::Error,
    },
    #[error("could not write report: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime { .. } => 4,
            CliError::Io(_) => 5,
        }
    }
}

pub(crate) fn invalid(e: ncwwlab_core::Error) -> CliError {
    CliError::Validation(e.to_string())
}
