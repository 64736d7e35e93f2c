use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ShellError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scene: {0}")]
    Validation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] raylength_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ShellError>;

impl ShellError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ShellError::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ShellError::Parse { .. } => "parse",
            ShellError::Validation(_) => "validation",
            ShellError::Config(_) => "config",
            ShellError::Core(_) => "computation",
            ShellError::Io { .. } => "io",
            ShellError::Csv(_) => "csv",
            ShellError::Json(_) => "json",
        }
    }

    /// Machine-readable description for the error report.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let ShellError::Parse { line, column, .. } = self {
            v["line"] = json!(line);
            v["column"] = json!(column);
        }
        v
    }
}
