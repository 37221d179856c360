use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Runtime,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Validation => 2,
            ErrorCategory::Runtime => 3,
            ErrorCategory::Io => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("records cannot be combined: {0}")]
    MixedRecords(String),

    #[error("event at u = {u} lies outside the simulated window [0, {u_max}]")]
    EventOutsideWindow { u: f64, u_max: f64 },

    #[error("click tally is empty")]
    EmptyTally,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("root finding did not converge: {0}")]
    RootFinding(String),

    #[error("trajectory with stream index {index} failed: {source}")]
    Trajectory {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Runtime(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter { .. } | Error::Parse(_) | Error::Json(_) => {
                ErrorCategory::Validation
            }
            Error::Io(_) => ErrorCategory::Io,
            Error::Trajectory { source, .. } => source.category(),
            _ => ErrorCategory::Runtime,
        }
    }
}
