//! Command-line front end for `zigzag-core`: spectra, perturbation arrows,
//! eigenfunction tables and simulations, written as JSON, CSV and SVG.

pub mod commands;
pub mod config;
pub mod output;
pub mod parallel;
pub mod svg;

use std::fmt;

use serde::Serialize;
use zigzag_core::Error;

pub use commands::{Cli, Command};
pub use config::RunConfig;

/// Failure of a subcommand, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numeric(e) => e.code(),
            CliError::Io(_) => "io",
        }
    }

    /// `{"error": {"code": ..., "message": ...}}`
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            code: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        let w = Wrapper { error: Body { code: self.code(), message: self.to_string() } };
        serde_json::to_string(&w).expect("error JSON")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Numeric(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numeric(e)
    }
}
