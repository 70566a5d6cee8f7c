use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("class coverage: label {label} has no samples")]
    EmptyClass { label: i64 },

    #[error("dataset must contain at least one sample and one feature")]
    EmptyDataset,

    #[error("{context}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("need more samples than classes (n = {n}, K = {k})")]
    InsufficientSamples { n: usize, k: usize },

    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("rank d = {d} exceeds dimension p = {p}")]
    RankTooLarge { d: usize, p: usize },

    #[error("refusing to materialize a {p} x {p} matrix (limit {limit})")]
    SizeGuard { p: usize, limit: usize },

    #[error("log-determinant undefined for sigma2 = {0} in factored form")]
    SingularPrecision(f64),

    #[error("workspace does not match inputs: {0}")]
    StaleWorkspace(&'static str),

    #[error("optimization diverged at iteration {iteration}: non-finite {what}")]
    Divergence { iteration: usize, what: &'static str },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
