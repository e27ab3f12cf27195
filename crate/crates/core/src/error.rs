use thiserror::Error;

/// Errors raised across the forward model and the reconstruction pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model, grid or configuration violates its construction invariants.
    #[error("invalid construction: {0}")]
    Construction(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature failed: {message} (estimate {estimate:e}, error {error:e})")]
    Quadrature { message: String, estimate: f64, error: f64 },

    /// A symbol query landed outside the oracle's angular domain.
    #[error("direction outside oracle domain: {0}")]
    OutOfDomain(String),

    /// Floating point breakdown (vanishing symbol, non-finite values).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Least-squares design matrix is too ill-conditioned to trust.
    #[error("ill-conditioned fit (condition number {condition:e}): {message}")]
    Conditioning { message: String, condition: f64 },

    /// Ray data decays too slowly for the long-range model class.
    #[error("data not in model class: {0}")]
    NotInModelClass(String),

    /// Radon inversion did not stabilise across band doubling.
    #[error("inversion failed: {0}")]
    Inversion(String),

    /// Sinogram truncated while its edge values are non-negligible and no tail model exists.
    #[error("truncation error: {0}")]
    Truncation(String),

    /// Serialization or parse failure of an external document.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
