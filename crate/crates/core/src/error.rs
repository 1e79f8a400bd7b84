use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain an operation is defined on.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("classifier has a zero weight vector")]
    ZeroWeight,

    /// Lemma-7 style tail bound requested outside its precondition.
    #[error("bound inapplicable: {0}")]
    BoundInapplicable(String),

    #[error("idx parse error at byte {offset}: {reason}")]
    IdxParse { offset: usize, reason: String },

    #[error("container parse error at byte {offset}: {reason}")]
    ContainerParse { offset: usize, reason: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("training diverged at epoch {epoch}: loss {loss} (initial {initial})")]
    Diverged { epoch: usize, loss: f64, initial: f64 },

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
