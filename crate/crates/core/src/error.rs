use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("matrix is too ill-conditioned (min/max eigenvalue ratio {ratio:e})")]
    Degenerate { ratio: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Fisher information is infinite; no upper bound exists")]
    InfiniteFisherInformation,

    #[error("image of size {width}x{height} is too small for {levels} levels with block side {block_side}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        levels: usize,
        block_side: usize,
    },

    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),

    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("image error: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
