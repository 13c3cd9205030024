use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {reason}", path.display())]
    Decode { path: PathBuf, reason: String },

    #[error("{}:{line}: {reason}", path.display())]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("{}: label {label} does not fit in an 8-bit mask", path.display())]
    LabelOutOfRange { path: PathBuf, label: u32 },

    #[error("{}: frame is {found}, expected {expected}", path.display())]
    FrameSize {
        path: PathBuf,
        expected: mlbs_core::Dims,
        found: mlbs_core::Dims,
    },

    #[error("{}: no images found", path.display())]
    EmptySequence { path: PathBuf },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mlbs_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status for this error: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Core(mlbs_core::Error::InvalidParameter { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
