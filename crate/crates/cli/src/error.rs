use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{experiment}: {source}")]
    Compute {
        experiment: &'static str,
        #[source]
        source: qbm_core::error::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Io { .. } => "IoError",
            CliError::Compute { .. } => "ComputeError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Compute { .. } => 4,
        }
    }

    /// One-line JSON record written to stderr on failure.
    pub fn record(&self) -> String {
        let mut rec = json!({ "status": "error", "kind": self.kind(), "message": self.to_string() });
        if let CliError::Compute { experiment, .. } = self {
            rec["experiment"] = json!(experiment);
        }
        rec.to_string()
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: err.to_string() }
    }
}
