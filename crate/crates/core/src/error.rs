use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },

    /// Evaluation point lies outside the half-width the error function is defined on.
    #[error("|u| = {magnitude} exceeds the domain radius {radius}")]
    OutOfDomain { magnitude: f64, radius: f64 },

    /// The regularized error function takes the value minus infinity.
    #[error("regularized error function is unbounded below: {0}")]
    Unbounded(String),

    #[error("grid is not dyadic: {0}")]
    NonDyadicGrid(String),

    #[error("i/o: {0}")]
    Io(String),

    /// A number-theoretic identity that always holds was observed to fail.
    /// This means the implementation is wrong, never the input.
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn parse(input: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
