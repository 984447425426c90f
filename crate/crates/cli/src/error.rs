use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration file or arguments.
    #[error("config error: {0}")]
    Config(String),
    /// An experiment or file operation failed.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<tb_core::Error> for CliError {
    fn from(e: tb_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
