use thiserror::Error;

/// Errors raised by the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Evaluation point too close to the boundary for plain quadrature.
    #[error("evaluation point within {distance:e} of the boundary (node spacing {spacing:e})")]
    NearBoundary { distance: f64, spacing: f64 },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The coefficient matrix lost rank; `order` is the first CGPT order whose
    /// columns are deficient.
    #[error("ill-posed least-squares system: coefficient matrix rank deficient at order {order}")]
    IllPosed { order: usize },

    #[error("inconsistent contrast: N2_11 ratio {ratio:e} is not positive")]
    InconsistentContrast { ratio: f64 },

    #[error("degenerate dictionary candidate: {0}")]
    DegenerateCandidate(String),

    #[error("degenerate descriptor normalization at order {order}")]
    DegenerateNormalization { order: usize },

    #[error("no rotational symmetry detected up to p = {p_max}")]
    NoSymmetryDetected { p_max: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
