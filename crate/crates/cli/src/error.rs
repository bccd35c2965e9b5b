use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Invariant(String),

    #[error(transparent)]
    Core(#[from] crowd_mdp::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }

    pub fn json(context: impl Into<String>) -> impl FnOnce(serde_json::Error) -> Self {
        let context = context.into();
        move |source| CliError::Json { context, source }
    }

    /// 2 input error, 3 capacity exceeded, 4 internal invariant violation.
    pub fn exit_code(&self) -> u8 {
        use crowd_mdp::Error as E;
        match self {
            CliError::Core(E::Capacity { .. }) => 3,
            CliError::Invariant(_) | CliError::Core(E::UndefinedPolicy { .. }) => 4,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
