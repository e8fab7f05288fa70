use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("round-trip check failed: relative error {error:.3e} exceeds {tol:.1e}")]
    RoundTrip { error: f64, tol: f64 },
    #[error("out of window: {0}")]
    Window(String),
    #[error("parameters outside the admissible range: {0}")]
    Inadmissible(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("divergent subordination: {0}")]
    Subordination(String),
    #[error("route disagreement: {0}")]
    RouteDisagreement(String),
    #[error("finite-difference stencil: {0}")]
    Stencil(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
