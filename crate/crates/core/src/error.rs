use crate::tf_core::TfError;

/// Failure modes of the platoon modules above the rational-function layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tf(#[from] TfError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operation requires a positive time headway")]
    RequiresPositiveHeadway,
    #[error("numerator and denominator share a root; factorization is degenerate")]
    DegenerateCancellation,
    #[error("Bezout identity violated: residual {0:.3e}")]
    BezoutViolation(f64),
    #[error("Youla parameter has unstable entries")]
    UnstableParameter,
    #[error("local factor (Y - Q H Ñ) vanishes identically")]
    SingularYFactor,
    #[error("controller factor is singular")]
    SingularFactor,
    #[error("operation requires identical vehicles")]
    RequiresHomogeneous,
    #[error("operation requires zero headway")]
    RequiresZeroHeadway,
    #[error("cost is infinite: closed-loop map is not strictly proper")]
    InfiniteCost,
    #[error("design plant lacks the Padé factor for the loop delay")]
    MismatchedPlantDelay,
    #[error("delay {delay_s} s is not an integer number of {dt_s} s samples")]
    NonIntegerDelay { delay_s: f64, dt_s: f64 },
    #[error("simulation diverged: {signal} reached {value:.3e} at t = {t:.4} s")]
    Divergence { signal: String, value: f64, t: f64 },
    #[error("closed-loop map disagrees with its closed form by {0:.3e}")]
    ClosedFormMismatch(f64),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
}

pub type Result<T> = std::result::Result<T, Error>;
