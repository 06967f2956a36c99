use std::path::{Path, PathBuf};

use thiserror::Error;

/// Harness errors; each maps to a process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV {}: {msg}", path.display())]
    Csv { path: PathBuf, msg: String },
    #[error(transparent)]
    Lib(#[from] relaxbayes::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 0 ok, 1 config, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        use relaxbayes::Error as L;
        match self {
            Error::Config(_) => 1,
            Error::Numerical(_) => 2,
            Error::Io { .. } | Error::Csv { .. } => 3,
            Error::Lib(e) => match e {
                L::Config(_) | L::Dimension { .. } => 1,
                L::Domain(_) | L::Numerical(_) => 2,
                L::Parse { .. } | L::Io(_) => 3,
            },
        }
    }
}
