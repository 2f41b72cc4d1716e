use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Gamma factor of a closed form sits on a pole.
    #[error("pole: {0}")]
    Pole(String),

    /// The input does not satisfy a numerical precondition; `suggested`
    /// carries a value of the offending parameter that would.
    #[error("precondition failed: {message}")]
    Precondition { message: String, suggested: Option<f64> },

    /// The requested tolerance could not be reached.
    #[error("accuracy not reached: {message} (best estimate {best_estimate}, error estimate {err_est:e})")]
    Accuracy {
        message: String,
        best_estimate: f64,
        err_est: f64,
    },

    #[error("divergent: {0}")]
    Divergent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An empirical model fit was rejected.
    #[error("model error: {0}")]
    Model(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn precondition(msg: impl Into<String>, suggested: Option<f64>) -> Self {
        Error::Precondition {
            message: msg.into(),
            suggested,
        }
    }

    /// Whether this is a numerical accuracy failure (as opposed to bad input).
    pub fn is_accuracy(&self) -> bool {
        matches!(self, Error::Accuracy { .. } | Error::Model(_))
    }
}
