use seabed_core::Error as CoreError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// A replayed run produced different bytes.
    #[error("replay mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    /// Process exit status: 2 usage, 3 configuration or input, 4 numerical,
    /// 5 i/o, 6 replay mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(CoreError::Io(_)) | CliError::Io(_) => 5,
            CliError::Core(_) => 3,
            CliError::Mismatch(_) => 6,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
