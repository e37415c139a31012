use thiserror::Error;

/// Crate-wide error. Messages are prefixed with the originating module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{module}: invalid argument: {message}")]
    Argument { module: &'static str, message: String },
    #[error("panel: missing column `{0}`")]
    Schema(String),
    #[error("panel: {0}")]
    Data(String),
    #[error("panel: design violation: {0}")]
    DesignViolation(String),
    #[error("numerics: singular design, collinear columns {columns:?}")]
    Singular { columns: Vec<usize> },
    #[error("numerics: no convergence after {iterations} sweeps")]
    Convergence { iterations: usize },
    #[error("estimators: {0}")]
    Estimation(String),
    #[error("estimators: state {state:?} has no support in arm {arm}")]
    ZeroSupport { arm: u8, state: Vec<usize> },
    #[error("inference: {0}")]
    Inference(String),
    #[error("validation: {0}")]
    Diagnostic(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(module: &'static str, message: impl Into<String>) -> Self {
        Error::Argument { module, message: message.into() }
    }

    /// Process exit code used by the CLI: 2 config, 3 data, 4 estimation/inference.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument { .. } => 2,
            Error::Schema(_) | Error::Data(_) | Error::DesignViolation(_) | Error::Io(_) => 3,
            Error::Singular { .. }
            | Error::Convergence { .. }
            | Error::Estimation(_)
            | Error::ZeroSupport { .. }
            | Error::Inference(_)
            | Error::Diagnostic(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
