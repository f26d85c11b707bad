use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (after jitter retry)")]
    NotPositiveDefinite,

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("constraint initialization exhausted after {attempts} attempts (kappa = {kappa})")]
    InitializationExhausted { attempts: usize, kappa: f64 },

    #[error("all model levels have zero weight")]
    ZeroWeight,

    #[error("unbalanced design: {0}")]
    UnbalancedDesign(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Short category tag used for CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) | Error::DimensionMismatch(_) | Error::EmptyInput(_) => "invalid-input",
            Error::NotPositiveDefinite | Error::RankDeficient => "numeric",
            Error::InitializationExhausted { .. } => "inadmissible-kappa",
            Error::ZeroWeight => "numeric",
            Error::UnbalancedDesign(_) => "invalid-input",
            Error::MissingColumn(_) | Error::Parse { .. } | Error::EmptyFile(_) => "data",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Context { source, .. } => source.category(),
        }
    }

    pub fn is_initialization_exhausted(&self) -> bool {
        match self {
            Error::InitializationExhausted { .. } => true,
            Error::Context { source, .. } => source.is_initialization_exhausted(),
            _ => false,
        }
    }
}
