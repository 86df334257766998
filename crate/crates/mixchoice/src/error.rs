use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point outside the experimental region: {0}")]
    RegionViolation(String),

    #[error("coordinate out of range: {0}")]
    OutOfRange(String),

    #[error("information matrix is singular or ill-conditioned")]
    SingularInformation,

    #[error("information matrix is singular for prior draw {draw}")]
    SingularDraw { draw: usize },

    #[error("every optimization start ended with a singular information matrix; increase the number of choice sets S")]
    AllStartsSingular,

    #[error("covariance matrix is not positive semidefinite: {0}")]
    InvalidCovariance(String),

    #[error("Halton dimension {dim} exceeds the prepared table of {max} prime bases")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Csv {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for input errors, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::SingularInformation
            | Error::SingularDraw { .. }
            | Error::AllStartsSingular => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
