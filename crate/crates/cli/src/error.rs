use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Usage or configuration problem; exit code 2.
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] annulus_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
