use thiserror::Error;

use crate::fockops::FactorKind;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("layout has no {0} factor")]
    UnknownFactor(FactorKind),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("operator is not Hermitian (defect {defect:e}, scale {scale:e})")]
    NonHermitian { defect: f64, scale: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("integrator diverged at t = {time:e} s: {reason}")]
    IntegratorDivergence { time: f64, reason: String },

    #[error("frame drift at t = {time:e} s: residual amplitude {residual:e} exceeds {tolerance:e}")]
    FrameDrift { time: f64, residual: f64, tolerance: f64 },

    #[error("Fock leakage at t = {time:e} s: {factor} top-level occupation {occupation:e} exceeds {limit:e}")]
    Leakage { time: f64, factor: FactorKind, occupation: f64, limit: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("drive switch misconfigured: |<a>| drifted by {drift:.3e} (relative), limit {limit:.3e}")]
    MisconfiguredSwitch { drift: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// True for errors raised by a numerical guard (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SimError::IntegratorDivergence { .. }
                | SimError::FrameDrift { .. }
                | SimError::Leakage { .. }
                | SimError::MisconfiguredSwitch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
