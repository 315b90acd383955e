//! Command failures and their exit codes.

use std::fmt;

use tabxform::Error;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_REMOTE: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure { code: EXIT_DATA, message: message.into() }
    }

    pub fn remote(message: impl Into<String>) -> Self {
        Failure { code: EXIT_REMOTE, message: message.into() }
    }

    /// Prefixes the message with where it happened.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Grammar(_) | Error::Parse { .. } => EXIT_USAGE,
            Error::Remote { .. } | Error::OversizePrompt { .. } => EXIT_REMOTE,
            _ => EXIT_DATA,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;
