use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Exit status for a rejected config, unreadable input or bad file.
pub const EXIT_INVALID: i32 = 2;
/// Exit status when at least one requested claim fails.
pub const EXIT_CLAIM_FAILURE: i32 = 1;
/// Exit status for numerical failures inside a run.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// A config problem pinned to a position in the source text.
    #[error("{origin}:{line}:{column}: {message}")]
    Config {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}", io_message(.path, .source))]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: unsupported schema version {found:?}, this build reads {supported}.x", .path.display())]
    Schema {
        path: PathBuf,
        found: String,
        supported: u32,
    },

    #[error("{}: {message}", .path.display())]
    Corrupt { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] isoflow_core::Error),

    #[error("{failed} of {total} claims failed")]
    ClaimsFailed { failed: usize, total: usize },
}

fn io_message(path: &std::path::Path, source: &io::Error) -> String {
    if source.kind() == io::ErrorKind::NotFound {
        format!("file not found: {}", path.display())
    } else {
        format!("{}: {source}", path.display())
    }
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use isoflow_core::Error as E;
        match self {
            HarnessError::ClaimsFailed { .. } => EXIT_CLAIM_FAILURE,
            HarnessError::Core(E::QuadratureNonConvergence { .. })
            | HarnessError::Core(E::EigenNonConvergence { .. })
            | HarnessError::Core(E::InconsistentLyapunov { .. }) => EXIT_NUMERIC,
            _ => EXIT_INVALID,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
