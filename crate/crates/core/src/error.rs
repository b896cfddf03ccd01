use thiserror::Error;

/// Errors produced by the numerical kernels and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("overflow in {op}: {msg}")]
    Overflow { op: &'static str, msg: String },

    #[error("grid resolution error: {0}")]
    Resolution(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("quadrature failed to converge: {0}")]
    Accuracy(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("probe error: {0}")]
    Probe(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub fn overflow(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Overflow { op, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
