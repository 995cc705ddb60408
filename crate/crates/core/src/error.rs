use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// The variants are grouped by cause so that front ends can map them onto
/// distinct exit codes: bad parameters, bad data, and model/solver failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function (negative time,
    /// an η outside (0, 1), ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters that cannot describe a valid distribution or model.
    #[error("invalid parameters: {0}")]
    Parameter(String),

    /// Input samples or traces that cannot be used.
    #[error("data error: {0}")]
    Data(String),

    /// The Markov chain or traffic model is unusable (reducible chain,
    /// state index out of range, ...).
    #[error("model error: {0}")]
    Model(String),

    /// A root finder could not bracket its target.
    #[error("solver error: target {target} outside [{lo_value}, {hi_value}] on bracket [{lo}, {hi}]")]
    Solver {
        target: f64,
        lo: f64,
        hi: f64,
        lo_value: f64,
        hi_value: f64,
    },

    /// The transmission limit needed to spend the collision budget lies beyond
    /// the solver horizon, i.e. the transmission is effectively unbounded.
    #[error("effectively infinite transmission: root beyond horizon {horizon} s")]
    Unbounded { horizon: f64 },

    /// A strategy could not be constructed from the given parameters.
    #[error("strategy construction error: {0}")]
    Construction(String),

    /// A strategy was paired with a traffic source or trace it cannot use.
    #[error("incompatible: {0}")]
    Incompatible(String),

    /// A text record could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "collision constraint must lie in (0, 1), got {eta}"
        )))
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be non-negative, got {t}")))
    }
}
