use std::fmt;

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    /// Failures outside the pipeline stages, such as writing outputs.
    Other = 1,
    Ingestion = 2,
    Training = 3,
    Evaluation = 4,
    Pairing = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Tags a library error with the exit status of the stage it happened in.
pub trait Stage<T> {
    fn stage(self, code: ExitCode) -> Result<T, CliError>;
}

impl<T> Stage<T> for wildreid::Result<T> {
    fn stage(self, code: ExitCode) -> Result<T, CliError> {
        self.map_err(|e| CliError::new(code, e.to_string()))
    }
}
