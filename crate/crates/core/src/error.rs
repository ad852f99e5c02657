use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate observable: sigma2 and M are both zero")]
    DegenerateObservable,

    #[error("invalid model specification: {0}")]
    Spec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("truncation search failed at N = {n}: tail mass bound {achieved:e} not below {epsilon:e}")]
    Truncation { n: usize, achieved: f64, epsilon: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("missing capability: {0}")]
    Capability(String),

    #[error("integration failed at x = {location:?}: {reason}")]
    Integration { location: Vec<f64>, reason: String },

    #[error("simulated state {state} exceeded the safety cap {cap}")]
    StateCap { state: usize, cap: usize },

    #[error("route not applicable: {0}")]
    RouteInapplicable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code used by the CLI: 2 for usage/domain problems,
    /// 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::Integration { .. } | Error::Truncation { .. } => 4,
            _ => 2,
        }
    }
}
