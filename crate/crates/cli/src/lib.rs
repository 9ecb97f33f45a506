//! Reproducible experiment runner built on `ncham-core`.
//!
//! An experiment is selected and parameterized by a flat `key=value` file
//! ([`config`]), executed by [`run`], and leaves plot-ready CSV tables plus a
//! `manifest.txt` run record under `<output_dir>/<experiment>/`.

pub mod config;
pub mod experiments;
pub mod runner;

use std::path::PathBuf;

pub use config::ExperimentConfig;
pub use experiments::Experiment;
pub use runner::{run, RunOutcome};

pub const USAGE: &str = "usage: ncham run <config-file> [--set key=value]... [--out dir]\n       ncham list";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}\n{USAGE}")]
    Usage(String),

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("numeric failure: {0}")]
    Numeric(#[from] ncham_core::Error),
}

impl CliError {
    /// 1 for configuration and I/O problems, 2 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 2,
            _ => 1,
        }
    }
}
