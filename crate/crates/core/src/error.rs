use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The CLI maps `Config`, `Regime` and `Resource` onto distinct exit codes;
/// everything else is reported as a generic failure.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit exceeded: {what} (limit {limit})")]
    Resource { what: String, limit: usize },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("quadrature did not converge: best estimate {best:e}, error estimate {error:e}")]
    Convergence { best: f64, error: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate ground state: gap {gap:e} below {tolerance:e}")]
    DegenerateGroundState { gap: f64, tolerance: f64 },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Domain(msg.into()))
}
