use thiserror::Error;

/// Errors produced by the lens distortion library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("monomial z^{k} conj(z)^{l} has degree below 2")]
    InvalidMonomial { k: u32, l: u32 },

    #[error("degree {0} exceeds the supported maximum of {max}", max = crate::poly::MAX_DEGREE)]
    DegreeTooHigh(u32),

    #[error("degree {0} block is not allowed (displacements start at degree 2)")]
    InvalidDegree(u32),

    #[error("block of degree {degree} must be 2x{expected}, got {rows}x{cols}")]
    BlockShape {
        degree: u32,
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis of '{label}' is not linearly independent (sigma ratio {ratio:.3e})")]
    DependentBasis { label: String, ratio: f64 },

    #[error("unknown model name '{0}'")]
    UnknownModel(String),

    #[error("point is at the distortion center")]
    OriginPoint,

    #[error("inversion did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular or orientation-reversing jacobian (det {det:.3e}) at iteration {iteration}")]
    SingularJacobian { iteration: usize, det: f64 },

    #[error("point projects with non-positive depth {0}")]
    NonPositiveDepth(f64),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
