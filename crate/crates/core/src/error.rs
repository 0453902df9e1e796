use std::path::PathBuf;

/// Broad failure classes, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Divergence,
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch in {dim}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        dim: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corrupt forward trace: {0}")]
    Trace(String),

    #[error("image file not found: {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("unsupported image format: {}", path.display())]
    UnsupportedFormat { path: PathBuf },

    #[error("corrupt image {}: {reason}", path.display())]
    CorruptImage { path: PathBuf, reason: String },

    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("bad dataset layout at {}: {reason}", path.display())]
    Layout { path: PathBuf, reason: String },

    #[error("class directory has no images: {}", path.display())]
    EmptyClass { path: PathBuf },

    #[error("{0}")]
    Data(String),

    #[error("training diverged in fold {fold} at epoch {epoch}: loss is {loss}")]
    Diverged { fold: usize, epoch: usize, loss: f64 },

    #[error("corrupt file {}: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidSpec(_) | Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::Diverged { .. } => ErrorClass::Divergence,
            Error::Corrupt { .. } | Error::Io { .. } | Error::Trace(_) => ErrorClass::Io,
            Error::Shape { .. }
            | Error::MissingFile { .. }
            | Error::UnsupportedFormat { .. }
            | Error::CorruptImage { .. }
            | Error::ImageTooSmall { .. }
            | Error::Layout { .. }
            | Error::EmptyClass { .. }
            | Error::Data(_) => ErrorClass::Data,
        }
    }

    pub(crate) fn shape(
        op: &'static str,
        dim: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Shape {
            op,
            dim,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
