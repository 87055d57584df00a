use std::path::PathBuf;

/// Errors raised by configuration, simulation and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },

    #[error("state diverged (|x| > {limit:e}) at t = {t}")]
    Diverged { t: f64, limit: f64 },

    #[error("step h = {h:e} too large for maximum gain {max_gain}; need h <= {required:e}")]
    StepTooLarge {
        h: f64,
        max_gain: f64,
        required: f64,
    },

    #[error("t = {t} outside sampled domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("t = {t} is a corner instant; use the corner list for left/right derivatives")]
    AtCorner { t: f64 },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("signal never entered the convergence band")]
    NotConverged,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for validation problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } | Error::Diverged { .. } | Error::NotConverged => 3,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
