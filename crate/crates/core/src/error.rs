use thiserror::Error;

/// Which block of a [`Sample`](crate::data::Sample) a column index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Treatment,
    Covariate,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Block::Treatment => f.write_str("treatment"),
            Block::Covariate => f.write_str("covariate"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("{block} column {index} has zero variance; drop it before balancing")]
    ConstantColumn { block: Block, index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("base weight {index} is not strictly positive")]
    NonpositiveBaseWeight { index: usize },

    #[error("dual Hessian stayed singular after ridge escalation to {ridge:e}")]
    SingularHessian { ridge: f64 },

    #[error(
        "entropy balancing did not converge after {iterations} iterations (residual {residual:e}); \
         the balance constraints may be infeasible for this feature set"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("design matrix is rank deficient at term {column}")]
    RankDeficientDesign { column: usize },

    #[error("invalid weight vector: {0}")]
    WeightVectorInvalid(String),

    #[error("sandwich bread matrix is singular")]
    SingularBread,

    #[error("{failed} of {total} bootstrap resamples failed (limit 5%)")]
    TooManyFailedResamples { failed: usize, total: usize },

    #[error("invalid bootstrap request: {0}")]
    InvalidBootstrap(String),

    #[error("treatment value {value} lies outside the spline support [{lower}, {upper}]")]
    OutOfRange { value: f64, lower: f64, upper: f64 },

    #[error("spline basis is ill-conditioned (smallest singular value {min_singular_value:e}); reduce the knot count")]
    IllConditionedBasis { min_singular_value: f64 },

    #[error("covariate cross-product matrix is singular")]
    SingularCrossProduct,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("column `{0}` not found in the input header")]
    MissingColumn(String),

    #[error("no complete rows remain after dropping missing values")]
    EmptyAfterFiltering,

    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: u64,
        column: String,
        message: String,
    },

    #[error("method {method} does not support {what}")]
    Unsupported { method: String, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// Input problems and solver non-convergence get distinct codes so that
    /// scripts can tell a bad file from an infeasible balance problem.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::NotConverged { .. } | Error::SingularHessian { .. } => 3,
            Error::InvalidSample(_)
            | Error::ConstantColumn { .. }
            | Error::MissingColumn(_)
            | Error::EmptyAfterFiltering
            | Error::ParseError { .. }
            | Error::InvalidConfig(_)
            | Error::InvalidModel(_)
            | Error::InvalidBootstrap(_)
            | Error::Io(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
