use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants under "numerical guards" signal that a computation ran but
/// left its validity window (truncation, trace drift, step-size collapse);
/// everything else is a caller-side domain or contract violation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),
    #[error("invalid density operator: {0}")]
    InvalidState(String),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("relative entropy diverges: {0}")]
    DivergentRelativeEntropy(String),
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
    #[error("generator mismatch: {0}")]
    GeneratorMismatch(String),
    #[error("regime violation: {0}")]
    Regime(String),
    #[error("model inconsistency: {0}")]
    Model(String),
    #[error("invalid configuration: {0}")]
    Config(String),

    // numerical guards
    #[error("Fock truncation insufficient: {0}")]
    Truncation(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("trace drift {0:e} exceeds tolerance")]
    TraceDrift(f64),
    #[error("positivity lost: minimum eigenvalue {0:e}")]
    PositivityLost(f64),
    #[error("steady state is not unique: {0}")]
    DegenerateSteadyState(String),
    #[error("stationarity not reached: {0}")]
    NotStationary(String),
}

impl Error {
    /// True for errors that come from a numerical guard tripping rather
    /// than from invalid input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Truncation(_)
                | Error::Integration(_)
                | Error::TraceDrift(_)
                | Error::PositivityLost(_)
                | Error::DegenerateSteadyState(_)
                | Error::NotStationary(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
