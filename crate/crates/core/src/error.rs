use thiserror::Error;

/// Errors produced by the surface-flow pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// The pullback metric is (numerically) singular at a grid point, e.g.
    /// because the parametrization degenerates there.
    #[error("degenerate metric at grid point (t={t}, x1={i1}, x2={i2}): det g = {det}")]
    DegenerateMetric { t: usize, i1: usize, i2: usize, det: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("periodicity of boundary spec does not match surface wrap flags: {0}")]
    InconsistentPeriodicity(String),

    #[error("invalid surface spec: {0}")]
    InvalidSpec(String),

    #[error("file format error: {0}")]
    FormatError(String),

    /// Tangential motion would push the reparametrization map across a
    /// non-periodic chart boundary.
    #[error("tangential flow violates a non-periodic boundary: {0}")]
    BoundaryViolation(String),

    /// Per-step displacement of the reparametrization exceeds half a grid
    /// cell; the caller must refine the time axis.
    #[error("reparametrization step {step} moves {disp:.3} grid cells (max 0.5); refine nt")]
    CflExceeded { step: usize, disp: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape_mismatch(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch { expected: expected.into(), got: got.into() }
    }
}
