use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("audit `{label}`: {source}")]
    Audit {
        label: String,
        #[source]
        source: ricci_lab::Error,
    },

    #[error(transparent)]
    Core(#[from] ricci_lab::Error),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Usage(String),
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
