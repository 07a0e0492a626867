use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The imbalance of the initial state vanishes, so `I(nT)` cannot be
    /// normalised.
    #[error("degenerate imbalance normalisation: I(0) = {0:e}")]
    DegenerateNormalization(f64),

    #[error("numerical contract violated: {0}")]
    Numerical(String),

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("resource gate rejected run: {0}")]
    ResourceGate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
