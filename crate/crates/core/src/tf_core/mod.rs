//! Rational-function algebra, realizations, system norms and delay
//! approximation over continuous-time real-rational functions.

pub mod freq;
pub mod linalg;
pub mod matrix;
pub mod norms;
pub mod pade;
pub mod poly;
pub mod rational;
pub mod statespace;

pub use matrix::{Structure, TfMatrix};
pub use norms::{h2_inner, h2_norm, h2_norm_tfm, hinf_norm, hinf_norm_ss, hinf_norm_tfm, hinf_report_tfm, HinfReport};
pub use pade::pade_approx;
pub use poly::Polynomial;
pub use rational::{ArithOp, RationalFn};
pub use statespace::{tfm_to_state_space, to_state_space, StateSpace};

/// Poles must have real part below `-EPS_STAB` to count as stable.
pub const EPS_STAB: f64 = 1e-9;

/// Largest numerator or denominator degree a `RationalFn` may carry.
pub const DEGREE_CAP: usize = 60;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TfError {
    #[error("division by the zero function")]
    DivisionByZeroFn,
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("system is improper (relative degree < 0)")]
    ImproperSystem,
    #[error("system is unstable")]
    UnstableSystem,
    #[error("system is not strictly proper")]
    NotStrictlyProper,
    #[error("delay must be nonnegative")]
    NegativeDelay,
    #[error("approximation order must be at least 1")]
    InvalidOrder,
    #[error("polynomial degree {degree} exceeds the cap of {DEGREE_CAP}")]
    DegreeOverflow { degree: usize },
    #[error("dimension mismatch")]
    DimensionMismatch,
    #[error("structure violation: {0}")]
    StructureViolation(String),
}
