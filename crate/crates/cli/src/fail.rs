use std::fmt;

use humimic_core::Error;

/// Exit code 2: the inputs or configuration are unusable.
pub const EXIT_INPUT: u8 = 2;
/// Exit code 1: valid inputs, but the run failed.
pub const EXIT_RUNTIME: u8 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

pub fn runtime(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.into(),
    }
}

/// Adds context to core errors while choosing the exit code.
pub trait Context<T> {
    fn input_ctx(self, what: impl fmt::Display) -> CliResult<T>;
    fn runtime_ctx(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<Error>> Context<T> for Result<T, E> {
    fn input_ctx(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| input(format!("{what}: {}", e.into())))
    }

    fn runtime_ctx(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| runtime(format!("{what}: {}", e.into())))
    }
}
