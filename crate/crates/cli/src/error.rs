use thiserror::Error;

/// Failures surfaced by the command-line front end, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Infeasible(_) => 3,
            Self::Io(_) => 4,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::Io(format!("{}: {err}", path.display()))
    }
}

impl From<slipwalk::Error> for CliError {
    fn from(e: slipwalk::Error) -> Self {
        Self::Validation(e.to_string())
    }
}
