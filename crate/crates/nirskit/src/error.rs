use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("checksum mismatch for {file}: manifest {expected}, file {actual}")]
    Checksum { file: String, expected: String, actual: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("step {step} ({op}) failed: {source}")]
    Step { step: usize, op: String, source: Box<Error> },
    #[error(transparent)]
    Core(#[from] nirskit_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
