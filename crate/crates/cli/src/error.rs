use std::io;
use std::path::PathBuf;

use tbpr::{CheckpointError, DataError, EvalError, ModelError, TrainError};
use thiserror::Error;

/// Process exit status for a failed command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Config = 1,
    Data = 2,
    Diverged = 3,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: DataError,
    },
    #[error("{path}: {source}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: CheckpointError,
    },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("unknown user {0:?}")]
    UnknownUser(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(context: impl Into<String>, source: DataError) -> Self {
        CliError::Data {
            context: context.into(),
            source,
        }
    }

    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::Config,
            CliError::Train(TrainError::Diverged { .. }) => ExitStatus::Diverged,
            CliError::Train(TrainError::InvalidConfig(_)) => ExitStatus::Config,
            CliError::Model(ModelError::InvalidDims(_)) => ExitStatus::Config,
            _ => ExitStatus::Data,
        }
    }
}
