use std::fmt;
use std::process::ExitCode;

use ppga_core::Error;

use crate::config::ConfigError;

/// Failure with its process exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub source: anyhow::Error,
}

pub const EXIT_OTHER: u8 = 1;
/// Unreadable or malformed input, or an invalid flag.
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;
/// An x-update missed its accuracy target under the abort policy.
pub const EXIT_SUBSOLVER: u8 = 4;

impl CliError {
    pub fn input(source: anyhow::Error) -> Self {
        Self {
            code: EXIT_INPUT,
            source,
        }
    }

    pub fn config(msg: String) -> Self {
        Self {
            code: EXIT_INPUT,
            source: anyhow::Error::msg(msg),
        }
    }

    pub fn other(source: anyhow::Error) -> Self {
        Self {
            code: EXIT_OTHER,
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::config(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Privacy(_) => EXIT_BUDGET,
            Error::Subsolver(_) => EXIT_SUBSOLVER,
            Error::Parse(_) | Error::Model(_) | Error::Param(_) => EXIT_INPUT,
            Error::Metrics(_) => EXIT_OTHER,
        };
        Self { code, source: e.into() }
    }
}

impl From<ppga_core::PrivacyBudgetError> for CliError {
    fn from(e: ppga_core::PrivacyBudgetError) -> Self {
        Error::from(e).into()
    }
}
