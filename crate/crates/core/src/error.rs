use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("incompatible grids")]
    IncompatibleGrids,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("response/covariate length mismatch: {response} responses for {curves} curves")]
    LengthMismatch { response: usize, curves: usize },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("requested {requested} components but attainable rank is {attainable}")]
    RankExceeded { requested: usize, attainable: usize },

    #[error("invalid {family} covariance parameter: {reason}")]
    InvalidCovariance {
        family: &'static str,
        reason: String,
    },

    #[error("matrix not positive definite")]
    NotPositiveDefinite,

    #[error("rank deficient design: columns {columns:?} are linearly dependent")]
    RankDeficient { columns: Vec<usize> },

    #[error("singular Gram matrix for basis projection")]
    SingularGram,

    #[error("invalid horizon {0}: horizons must be >= 1")]
    InvalidHorizon(i64),

    #[error("no admissible model")]
    NoAdmissibleModel,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the numerical core rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite
                | Error::RankDeficient { .. }
                | Error::SingularGram
                | Error::NoAdmissibleModel
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
