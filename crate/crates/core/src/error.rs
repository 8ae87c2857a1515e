use thiserror::Error;

/// Errors raised by the library. CLI maps these to exit code 1.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigen-solver did not converge for the {0}-point Jacobi matrix")]
    NoConvergence(usize),

    #[error("threshold {u} lies outside the closure of the range of every branch")]
    OutOfRange { u: f64, below: bool },

    #[error("all Hermite coefficients up to order {max_order} are below tolerance {zero_tol}")]
    RankUndetectable { max_order: usize, zero_tol: f64 },

    #[error("assumption A violated: {0}")]
    AssumptionViolated(String),

    #[error("probability {0} cannot be bracketed by the range of the CDF")]
    NotBracketable(f64),

    #[error("circulant embedding not nonnegative-definite: min eigenvalue {min_eig:e} at size {size}")]
    EmbeddingNotNnd { min_eig: f64, size: usize },

    #[error("regime {found} not allowed here (requires {required})")]
    WrongRegime { found: String, required: String },

    #[error("lag cap too small: tail bound {tail_bound:e} exceeds 1e-3 of value {value:e}")]
    LagCapTooSmall { value: f64, tail_bound: f64 },

    #[error("nonpositive radicand {0:e} in normalizing constant")]
    NonpositiveRadicand(f64),

    #[error("io error: {0}")]
    Io(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
