//! Scenario runner for the IPOP supply simulator.
//!
//! The binary (`ipop`) is a thin clap front end over [`runner`]; everything
//! that produces files lives in [`output`] and [`plot`].

pub mod catalog;
pub mod output;
pub mod plot;
pub mod runner;

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("simulation aborted: {0}")]
    Abort(String),
    #[error("assertion failed: {0}")]
    Assert(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Abort(_) => 3,
            CliError::Assert(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Scenario text plus where it came from.
#[derive(Clone, Debug)]
pub struct Source {
    pub label: String,
    pub text: String,
}

/// A path to a scenario file, or the name of a catalog entry.
pub fn load_source(arg: &str) -> Result<Source, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return Ok(Source { label: arg.to_string(), text });
    }
    match catalog::find(arg) {
        Some(e) => Ok(Source { label: e.name.to_string(), text: e.text.to_string() }),
        None => Err(CliError::Validation(format!(
            "{arg}: no such file and no catalog entry of that name (see `ipop catalog list`)"
        ))),
    }
}
