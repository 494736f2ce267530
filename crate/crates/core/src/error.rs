use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("integer overflow while {0}")]
    Overflow(String),
    #[error("resource cap exceeded: {what} (cap {cap})")]
    ResourceLimit { what: String, cap: u64 },
    #[error("evaluation at a pole: {0}")]
    Pole(String),
    #[error("pole on contour: {0}")]
    PoleOnContour(String),
    #[error("no admissible configuration: {0}")]
    Configuration(String),
    #[error("accuracy target missed: last {last:e}, previous {previous:e}, difference {diff:e}")]
    Accuracy { last: f64, previous: f64, diff: f64 },
    #[error("negative probability {0:e}")]
    NegativeProbability(f64),
    #[error("unsupported descriptor: {0}")]
    UnsupportedDescriptor(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Accuracy { .. } | Error::NegativeProbability(_) | Error::PoleOnContour(_) => 3,
            Error::ResourceLimit { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
