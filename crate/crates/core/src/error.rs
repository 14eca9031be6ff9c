use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// An observed transition has zero probability under every
    /// positively weighted candidate kernel.
    #[error("learning error: transition {from} -> {to} is impossible under belief {theta:?}")]
    Learning {
        from: usize,
        to: usize,
        theta: Vec<f64>,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("stability failure: {0}")]
    Stability(String),

    #[error("no convergence after {iterations} iterations (last delta {last_delta:e})")]
    NonConvergence {
        iterations: usize,
        last_delta: f64,
        history: Vec<f64>,
    },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::Certification(_) | Error::Stability(_) => 3,
            Error::NonConvergence { .. } => 4,
            Error::Domain(_) | Error::Resource(_) | Error::Learning { .. } | Error::Numerical(_) => 5,
        }
    }
}
