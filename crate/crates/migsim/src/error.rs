use std::io;
use std::path::Path;

/// Process exit status for a failed command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Validation = 1,
    Runtime = 2,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input data, reported with the offending field.
    #[error("{0}")]
    Validation(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] migsim_core::Error),
    #[error("{0}")]
    Runtime(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn invalid(field: impl AsRef<str>, msg: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}: {msg}", field.as_ref()))
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { context: path.display().to_string(), source }
    }

    pub fn status(&self) -> ExitStatus {
        use migsim_core::Error as E;
        match self {
            CliError::Validation(_) => ExitStatus::Validation,
            CliError::Core(E::Consistency(_) | E::Infeasible(_)) => ExitStatus::Runtime,
            CliError::Core(_) => ExitStatus::Validation,
            CliError::Io { .. } | CliError::Runtime(_) => ExitStatus::Runtime,
        }
    }
}
