use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] permbounds::Error),

    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("invalid argument: {0}")]
    Usage(String),

    /// A bound contradicted an exact value: a bug, not a user error.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use permbounds::Error as E;
        match self {
            CliError::Lib(E::SizeLimit { .. }) => 3,
            CliError::Lib(E::Numerical(_) | E::NotConverged { .. } | E::ScalingNotConverged(_)) => 1,
            CliError::Lib(_) | CliError::Io { .. } | CliError::Usage(_) => 2,
            CliError::Invariant(_) => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
