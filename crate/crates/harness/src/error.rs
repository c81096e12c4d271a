use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad or inconsistent configuration; exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// Unreadable or invalid input data; exit code 3.
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] spikebmi_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        HarnessError::Data(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit code: 2 for configuration problems, 3 for data
    /// problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use spikebmi_core::Error as E;
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
            HarnessError::Core(E::Config(_) | E::Argument(_)) => 2,
            HarnessError::Core(E::Parse { .. }) => 3,
            _ => 1,
        }
    }
}
