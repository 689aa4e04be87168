use gsvin::evaluation::EvalError;
use gsvin::gridworld::GridError;
use gsvin::models::ModelError;
use gsvin::training::TrainError;

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config values or input files.
    #[error("{0}")]
    Usage(String),
    /// A verification suite ran and failed.
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Check(_) => 3,
        }
    }

    pub fn io(what: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Internal(format!("{what}: {e}"))
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Grid(g) => g.into(),
            ModelError::Io(_) | ModelError::Tensor(_) => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) => CliError::Usage(e.to_string()),
            EvalError::Model(m) => m.into(),
            EvalError::Grid(g) => g.into(),
            EvalError::Train(t) => t.into(),
            EvalError::Tensor(_) => CliError::Internal(e.to_string()),
        }
    }
}
