//! Configuration files, report writers and experiment pipelines for
//! `plap-core`. The `plap` binary is a thin shell over [`run`].

pub mod config;
pub mod formats;
pub mod report;
pub mod run;

use std::path::PathBuf;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(plap_core::Error),
    #[error("probe failure: {0}")]
    Probe(plap_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("validation failed: {0}")]
    Validation(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 3,
            LabError::Solver(_) => 4,
            LabError::Probe(_) => 5,
            LabError::Io { .. } => 6,
            LabError::Validation(_) => 7,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }
}
