use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] wfcpl_core::Error),
    #[error("channel closed: {0}")]
    ChannelClosed(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("window {window} did not converge within {iterations} iterations")]
    NotConverged { window: usize, iterations: usize },
    #[error("window {window}: {source}")]
    InWindow { window: usize, source: Box<Error> },
}

impl Error {
    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Core(wfcpl_core::Error::InvalidConfig(_)) => 2,
            Error::NotConverged { .. } => 3,
            Error::InWindow { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
