use std::path::PathBuf;

use thiserror::Error;
use wvkerr_core::Error as CoreError;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const IO: i32 = 5;
    pub const SIMULATION: i32 = 6;
    pub const FIT: i32 = 7;
}

pub const EXIT_CODE_HELP: &str = "\
Exit codes:
  0  success
  2  usage error (bad command line)
  3  parse error in the config or a pmf file (line and column reported)
  4  validation error (field path and violated constraint reported)
  5  I/O error reading inputs or writing outputs
  6  simulation error (e.g. no post-selected trials, degenerate post-selection)
  7  fit error (singular design matrix or non-converging Gaussian fit);
     a sweep whose fit fails still writes its outputs before exiting";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Simulation(CoreError),
    #[error("{0}")]
    Fit(String),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Maps a library error raised while handling the config section `section`.
    pub fn from_core(section: &str, err: CoreError) -> Self {
        let field = |name: &str| {
            if section.is_empty() {
                name.to_string()
            } else {
                format!("{section}.{name}")
            }
        };
        match err {
            CoreError::InvalidParameter { name, reason } => CliError::validation(field(name), reason),
            CoreError::UnreachableVariance { .. } => CliError::validation(field("std_dn"), err.to_string()),
            CoreError::PmfParse { line, ref message } => CliError::Parse {
                path: field("path"),
                line,
                column: 1,
                message: message.clone(),
            },
            CoreError::Io(message) => CliError::Io {
                path: PathBuf::from(field("path")),
                message,
            },
            CoreError::SingularFit | CoreError::NonConvergence { .. } => CliError::Fit(err.to_string()),
            other => CliError::Simulation(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => exit::PARSE,
            CliError::Validation { .. } => exit::VALIDATION,
            CliError::Io { .. } => exit::IO,
            CliError::Simulation(_) => exit::SIMULATION,
            CliError::Fit(_) => exit::FIT,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Validation { .. } => "validation",
            CliError::Io { .. } => "io",
            CliError::Simulation(_) => "simulation",
            CliError::Fit(_) => "fit",
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
