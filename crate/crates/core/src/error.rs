use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no radial root of phi in [{lo}, {hi}] along direction {direction:?}")]
    NoRootInBracket { lo: f64, hi: f64, direction: [f64; 3] },

    #[error("constraint gradient vanishes at {0:?}")]
    DegenerateGradient([f64; 3]),

    #[error("projection onto the surface failed: {0}")]
    ProjectionFailed(Box<Error>),

    #[error("step too large: |phi| = {residual:e} after an unstabilized step at t = {time}")]
    StepTooLarge { residual: f64, time: f64 },

    #[error("momentum vector is zero or nearly zero (|L| = {0:e})")]
    ZeroMomentum(f64),

    #[error("matrix is not a proper rotation (orthogonality residual {orthogonality:e}, det {det})")]
    NotARotation { orthogonality: f64, det: f64 },

    #[error("invalid particle state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("monomial {exponents:?} has degree {degree}, above the limit {max}")]
    DegreeTooHigh { exponents: [u32; 3], degree: u32, max: u32 },

    #[error("unsupported output format `{0}` (expected svg, csv or json)")]
    UnsupportedFormat(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
