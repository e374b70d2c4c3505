use std::path::PathBuf;

use stackgame_core::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] stackgame_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("problem failed validation ({} violations)", .0.violations.len())]
    Validation(ValidationReport),

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("no feasible instance after {attempts} attempts")]
    InfeasibleSpec { attempts: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 1 for invalid input, 2 when no solution exists
    /// or the solver gives up, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        use stackgame_core::Error as Core;
        match self {
            Error::Io { .. } => 3,
            Error::InfeasibleSpec { .. } => 2,
            Error::Core(
                Core::FollowerInfeasible { .. }
                | Core::BestResponseInfeasible { .. }
                | Core::AllProfilesInfeasible
                | Core::NoEquilibriumFound
                | Core::Solver(_),
            ) => 2,
            Error::Core(_) | Error::Parse { .. } | Error::Validation(_) | Error::Spec(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
