use ratedist::RdError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solver(#[from] RdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INVALID_INPUT: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => exit::INVALID_INPUT,
            CliError::Solver(e) => match e {
                RdError::InvalidProblem(_)
                | RdError::Domain(_)
                | RdError::TargetUnreachable { .. } => exit::INVALID_INPUT,
                RdError::RootNotConverged { .. } | RdError::LinearSegment { .. } => {
                    exit::NOT_CONVERGED
                }
                _ => exit::FAILURE,
            },
            CliError::Json(e) if e.is_data() || e.is_syntax() => exit::INVALID_INPUT,
            _ => exit::FAILURE,
        }
    }
}
