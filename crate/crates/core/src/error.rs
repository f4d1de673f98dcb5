use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative entry {value} at {location}")]
    NegativeEntry { location: String, value: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("industry {industry} has zero gross output but a nonzero input column")]
    ZeroOutputWithInputs { industry: usize },

    #[error("economy is not productive: {0}")]
    NonProductive(String),

    #[error("requested {requested} links but only {available} are positive")]
    KTooLarge { requested: usize, available: usize },

    #[error("{what} = {value} is outside [0, 1]")]
    OutOfRange { what: String, value: f64 },

    #[error("aggregate {0} is zero")]
    ZeroAggregate(&'static str),

    #[error("simplex stopped at the iteration limit after {0} pivots")]
    IterationLimit(usize),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("rationing did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("block (I - A_dd) is numerically singular")]
    SingularBlock,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error(
        "industry {industry}: declared gross output {declared} disagrees with derived {derived}"
    )]
    IdentityViolation {
        industry: String,
        declared: f64,
        derived: f64,
    },

    #[error("unknown industry {0:?}")]
    UnknownIndustry(String),

    #[error("industry {0:?} has no shock entry")]
    MissingIndustry(String),

    #[error("invalid configuration: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad input data or arguments, as opposed to failures
    /// of a computation on valid input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NegativeEntry { .. }
                | Error::DimensionMismatch { .. }
                | Error::OutOfRange { .. }
                | Error::Parse { .. }
                | Error::IdentityViolation { .. }
                | Error::UnknownIndustry(_)
                | Error::MissingIndustry(_)
                | Error::InvalidSpec(_)
                | Error::KTooLarge { .. }
                | Error::Csv(_)
        )
    }
}
