use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{experiment}: {source}")]
    Module {
        experiment: &'static str,
        #[source]
        source: gibbs_core::Error,
    },
    #[error("{experiment}: {message}")]
    Runtime {
        experiment: &'static str,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    /// 1 for configuration problems, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 1,
            LabError::Module {
                source: gibbs_core::Error::Config(_),
                ..
            } => 1,
            _ => 2,
        }
    }

    pub fn module(experiment: &'static str) -> impl Fn(gibbs_core::Error) -> LabError {
        move |source| LabError::Module { experiment, source }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
