use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants map one-to-one onto the error names surfaced by the command line
/// tool (see [`Error::name`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input is empty")]
    EmptyInput,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("plot `{0}` selects no usable cells")]
    EmptyPlot(String),

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("missing band: {0}")]
    MissingBand(String),

    #[error("mask contains non-binary value {0}")]
    InvalidMask(f64),

    #[error("normal equations are singular; use lambda > 0")]
    SingularSystem,

    #[error("R² is undefined for a constant target")]
    UndefinedR2,

    #[error("no rows survived assembly")]
    EmptyDataset,

    #[error("token {token} is outside the vocabulary of size {vocab_size}")]
    InvalidToken { token: u32, vocab_size: usize },

    #[error("non-finite value at iteration {iteration}")]
    Numerical { iteration: usize },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("invalid trial set: {0}")]
    InvalidTrialSet(String),

    #[error("relative deviation undefined for zero reference (question {0})")]
    UndefinedDeviation(String),

    #[error("invalid ballot `{0}`: scores must be a permutation of 1..x")]
    InvalidBallot(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("no matching record: {0}")]
    NotFound(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier used in machine-readable error reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::EmptyInput => "EmptyInput",
            Error::InvalidInput(_) => "InvalidInput",
            Error::EmptyPlot(_) => "EmptyPlot",
            Error::GeometryMismatch(_) => "GeometryMismatch",
            Error::MissingBand(_) => "MissingBand",
            Error::InvalidMask(_) => "InvalidMask",
            Error::SingularSystem => "SingularSystem",
            Error::UndefinedR2 => "UndefinedR2",
            Error::EmptyDataset => "EmptyDataset",
            Error::InvalidToken { .. } => "InvalidToken",
            Error::Numerical { .. } => "NumericalError",
            Error::InvalidRanking(_) => "InvalidRanking",
            Error::InvalidTrialSet(_) => "InvalidTrialSet",
            Error::UndefinedDeviation(_) => "UndefinedDeviation",
            Error::InvalidBallot(_) => "InvalidBallot",
            Error::UnknownField(_) => "UnknownField",
            Error::NotFound(_) => "NotFound",
            Error::Io { .. } => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
