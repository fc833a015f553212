use std::path::PathBuf;

use gaitlab_core::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_GAIT_FAILURE: i32 = 2;
pub const EXIT_INVALID_CONFIG: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn invalid(e: Error) -> CliError {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_INVALID_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Model(
                Error::InvalidParameter(_)
                | Error::InfeasibleEnergy { .. }
                | Error::InconsistentCoords { .. },
            ) => EXIT_INVALID_CONFIG,
            CliError::Model(_) => EXIT_GAIT_FAILURE,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 3);
        assert_eq!(CliError::from(Error::StepFailed("fell")).exit_code(), 2);
        assert_eq!(CliError::from(Error::NoConvergence { iterations: 3 }).exit_code(), 2);
        assert_eq!(CliError::from(Error::InvalidParameter("p")).exit_code(), 3);
    }
}
