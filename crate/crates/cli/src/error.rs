use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] toruscover::Error),
    #[error("io error: {0}")]
    Io(String),
    #[error("lemma suite failed: {0}")]
    Lemma(String),
}

impl CliError {
    /// 1 for input, 2 for resources and IO, 3 for a failed lemma suite.
    pub fn exit_code(&self) -> ExitCode {
        let code = match self {
            CliError::Config(_) => 1,
            CliError::Core(toruscover::Error::Resource { .. }) => 2,
            CliError::Core(_) => 1,
            CliError::Io(_) => 2,
            CliError::Lemma(_) => 3,
        };
        ExitCode::from(code)
    }

    pub fn line(&self) -> String {
        self.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
