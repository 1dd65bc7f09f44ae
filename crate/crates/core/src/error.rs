use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a physical-layer formula or table.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario or agent configuration that cannot be simulated.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An accounting invariant was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
