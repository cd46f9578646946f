use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("quantile grids differ")]
    GridMismatch,

    #[error("mixed response kinds in one dataset")]
    MixedResponses,

    #[error("weighted coefficient sum {sum:e} is too close to zero")]
    NearSingularDenominator { sum: f64 },

    #[error("degenerate BIC: {0}")]
    DegenerateBic(String),

    #[error("no tuning pair satisfies the outlier bound")]
    NoFeasiblePair,

    #[error("fit has too few iterates ({0}) for a contraction trace")]
    InsufficientIterations(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error record.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::GridMismatch => "grid_mismatch",
            Error::MixedResponses => "mixed_responses",
            Error::NearSingularDenominator { .. } => "near_singular_denominator",
            Error::DegenerateBic(_) => "degenerate_bic",
            Error::NoFeasiblePair => "no_feasible_pair",
            Error::InsufficientIterations(_) => "insufficient_iterations",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Invariant(_) => "invariant_error",
            Error::Parse { .. } => "parse_error",
            Error::Shape(_) => "shape_error",
            Error::Io(_) => "io_error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
