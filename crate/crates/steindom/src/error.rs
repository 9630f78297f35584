use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation requested outside the range covered by tabulated data.
    #[error("range error: {0}")]
    Range(String),

    /// A spec was constructed with inconsistent or disallowed parameters.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// An estimator was applied to an input where it is undefined.
    #[error("singular input: {0}")]
    SingularInput(String),

    /// A numerical routine failed to converge. Carries the partial value and
    /// the residual error estimate at the point of failure.
    #[error("numeric error: {message} (partial value {partial}, residual {residual:e})")]
    Numeric {
        message: String,
        partial: f64,
        residual: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
