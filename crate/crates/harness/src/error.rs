use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] d2p2_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}:{line}: {message}")]
    Parse { source_name: String, line: usize, message: String },

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("run {run}: {source}")]
    Run {
        run: String,
        #[source]
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Core(d2p2_core::Error::Config(_)) => "config",
            HarnessError::Core(d2p2_core::Error::Numeric(_)) => "numeric",
            HarnessError::Core(d2p2_core::Error::Infeasible(_)) => "infeasible",
            HarnessError::Core(d2p2_core::Error::NoAdmissibleOrder) => "no_admissible_order",
            HarnessError::Core(_) => "core",
            HarnessError::Io { .. } => "io",
            HarnessError::Parse { .. } => "parse",
            HarnessError::Spec(_) => "spec",
            HarnessError::Run { source, .. } => source.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
