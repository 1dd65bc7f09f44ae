//! Experiment runner, presets and result summaries for the `lora-mab` binary.

use std::fmt;

pub mod runner;
pub mod spec;
pub mod summary;

#[derive(Debug)]
pub enum CliError {
    /// Invalid or unreadable experiment configuration.
    Config(String),
    /// Filesystem failure while reading or writing artifacts.
    Io(String),
    /// Some runs of an experiment failed; the rest were written.
    Partial { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Partial { .. } => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Partial { failed, total } => write!(f, "{failed} of {total} runs failed"),
        }
    }
}

impl std::error::Error for CliError {}
