use std::path::PathBuf;

use irlv::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("refusing to overwrite {0}; pass --force")]
    Exists(PathBuf),
    #[error("{0}: {1}")]
    File(PathBuf, std::io::Error),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for bad data, 4 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Exists(_) => 2,
            CliError::File(..) => 3,
            CliError::Core(e) if e.is_numeric() => 4,
            CliError::Core(Error::InvalidConfig(_) | Error::DegenerateShadowing) => 2,
            CliError::Core(Error::Domain(_)) => 4,
            CliError::Core(_) => 3,
        }
    }
}
