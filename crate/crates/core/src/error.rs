use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Divergence {
        iteration: usize,
        loss: f64,
        /// Trace rows recorded before the failure.
        trace: Vec<crate::neural::TraceRow>,
    },

    #[error("point below the converse bound: {0}")]
    Anomaly(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{context}: {source}")]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("all {0} runs of the sweep failed")]
    SweepFailed(usize),

    #[error("self-test failed: {0}")]
    Check(String),
}

impl Error {
    /// Stable machine-readable category, printed by the CLI and mapped to an exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) | Error::Shape { .. } => "invalid_argument",
            Error::Config(_) => "config",
            Error::Divergence { .. } | Error::SweepFailed(_) => "training",
            Error::Anomaly(_) => "anomaly",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Check(_) => "check",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "invalid_argument" => 2,
            "config" => 3,
            "training" => 4,
            "anomaly" => 5,
            "format" => 6,
            "io" => 7,
            _ => 8,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context: path.into(),
            source,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
