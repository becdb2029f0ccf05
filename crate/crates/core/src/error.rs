use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {source}")]
    ImageDecode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("image is {width}x{height}, smaller than requested size {target} (no upsampling)")]
    ImageTooSmall {
        width: usize,
        height: usize,
        target: usize,
    },

    #[error("image must be square, got {width}x{height}")]
    NotSquare { width: usize, height: usize },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("address out of range: {0}")]
    AddressOutOfRange(String),

    #[error("nothing to match: all coefficients are zero")]
    NothingToMatch,

    #[error("edge list was produced with a different bank configuration")]
    BankMismatch,

    #[error("chevron prior binning is incompatible with the requested lookup")]
    BinningMismatch,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
