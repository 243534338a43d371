use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration, including models that fail validation.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("seed required: pass --seed <u64> or set `seed` in the configuration")]
    MissingSeed,
    #[error("verification failed: {}", .0.join(", "))]
    VerifyFailed(Vec<String>),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::MissingSeed => 2,
            CliError::VerifyFailed(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl From<arcutoff_core::Error> for CliError {
    fn from(e: arcutoff_core::Error) -> Self {
        CliError::Runtime(anyhow::Error::new(e))
    }
}
