use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed document: {0}")]
    Parse(String),
    #[error("invalid {path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn invalid(path: impl Into<String>, msg: impl Into<String>) -> Error {
        Error::Invalid { path: path.into(), msg: msg.into() }
    }

    pub(crate) fn prefixed(self, prefix: &str) -> Error {
        match self {
            Error::Invalid { path, msg } => Error::Invalid { path: format!("{prefix}.{path}"), msg },
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
