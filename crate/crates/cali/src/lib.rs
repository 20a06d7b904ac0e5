//! File formats, configuration and the command implementations behind the
//! `cali` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset_io;
pub mod image;
pub mod tensorpack;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] cali_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error("checksum mismatch in entry {name:?} (payload at byte {offset})")]
    Checksum { name: String, offset: usize },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 1 for usage and validation problems, 2 for
    /// failures while running.
    pub fn exit_code(&self) -> i32 {
        use cali_core::Error as C;
        match self {
            Error::Usage(_) => 1,
            Error::Core(C::Config(_) | C::Usage(_) | C::Validation(_) | C::Dimension { .. }) => 1,
            _ => 2,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
