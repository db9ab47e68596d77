//! Manifest-driven experiment runner built on `blab-core`.

pub mod manifest;
pub mod runner;

pub use manifest::Manifest;
pub use runner::{run, run_one, RunSummary, TaskReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("task {id:?} failed: {source}")]
    Task {
        id: String,
        #[source]
        source: blab_core::Error,
    },
    #[error("{0}")]
    Io(String),
    #[error("{0} assertion(s) failed")]
    Assertions(usize),
}

impl CliError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Manifest(_) | CliError::Io(_) => 2,
            CliError::Assertions(_) => 3,
            CliError::Task { .. } => 4,
        }
    }
}
