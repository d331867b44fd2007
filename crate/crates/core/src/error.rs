use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("unsupported dimension {0}: only 2 and 4 are supported")]
    UnsupportedDimension(usize),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "segment {index} ({label}): target error {target:e} not reached within {cap} substeps \
         (last estimate {estimate:e})"
    )]
    Convergence {
        index: usize,
        label: String,
        target: f64,
        cap: usize,
        estimate: f64,
    },

    #[error("derivative of the field direction did not stabilise at t = {0}")]
    UnstableDerivative(f64),

    #[error("initial state does not match the reference eigenvector (infidelity {0:e})")]
    InitialMismatch(f64),

    #[error("tracking lost: fidelity {fidelity} at t = {time}")]
    TrackingLost { time: f64, fidelity: f64 },

    #[error("phase jump {jump:.3} rad between samples {index} and {next}; sample more densely", next = index + 1)]
    UnwrapTooCoarse { index: usize, jump: f64 },

    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
