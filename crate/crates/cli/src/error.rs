use std::path::Path;

use thiserror::Error;

use ringmix::wav::WavError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    /// Some outputs were written but part of the work failed.
    #[error("partial results: {0}")]
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Partial(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Partial(m) => m,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<ringmix::Error> for CliError {
    fn from(e: ringmix::Error) -> Self {
        use ringmix::Error as E;
        let root = match &e {
            E::AtSource { inner, .. } => inner.as_ref(),
            other => other,
        };
        match root {
            E::DegenerateRing(_) | E::Pairing(_) | E::Domain(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<WavError> for CliError {
    fn from(e: WavError) -> Self {
        CliError::Data(e.to_string())
    }
}
