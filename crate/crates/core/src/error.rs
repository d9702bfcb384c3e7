use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("simulation blew up at step {step}: node {node} became non-finite")]
    BlowUp { node: usize, step: u64 },

    #[error("invalid episode: {0}")]
    Validation(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("empty buffer: {0}")]
    EmptyBuffer(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::BlowUp { .. } => "blow_up",
            Error::Validation(_) => "validation",
            Error::Index(_) => "index",
            Error::EmptyBuffer(_) => "empty_buffer",
            Error::Contract(_) => "contract",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
