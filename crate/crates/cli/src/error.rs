use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] nbtrack_sim::SimError),
    #[error(transparent)]
    Core(#[from] nbtrack_core::Error),
    #[error(transparent)]
    Eval(#[from] nbtrack_eval::EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit code: 1 for configuration problems, 2 for failures while
    /// running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Sim(
                nbtrack_sim::SimError::Config(_)
                | nbtrack_sim::SimError::UnknownScenario { .. }
                | nbtrack_sim::SimError::Toml(_),
            ) => 1,
            CliError::Core(nbtrack_core::Error::InvalidParameter { .. }) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
