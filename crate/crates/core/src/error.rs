use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("atom index {index} out of range for {count} atoms")]
    AtomIndex { index: usize, count: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("operation requires a bosonic mode but the space has none")]
    NoMode,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("norm drift {drift:.3e} exceeds tolerance {tolerance:.1e}")]
    NormDrift { drift: f64, tolerance: f64 },

    #[error("trace drift {drift:.3e} exceeds tolerance {tolerance:.1e}")]
    TraceDrift { drift: f64, tolerance: f64 },

    #[error("Fock truncation leakage: population {population:.3e} in the top two levels at t = {time}")]
    Leakage { population: f64, time: f64 },

    #[error("thermal tail mass {tail:.3e} beyond cutoff {cutoff} exceeds 1e-8")]
    ThermalTail { tail: f64, cutoff: usize },

    #[error("integrator step size underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("engine mismatch: {0}")]
    Engine(String),

    #[error("signal analysis failed: {0}")]
    Signal(String),

    #[error("bad basis label `{0}`")]
    Label(String),
}

impl Error {
    /// True for failures of a numerical or physical check (as opposed to bad
    /// input).
    pub fn is_physics_failure(&self) -> bool {
        matches!(
            self,
            Error::NormDrift { .. }
                | Error::TraceDrift { .. }
                | Error::Leakage { .. }
                | Error::StepUnderflow(_)
                | Error::NotUnitary(_)
        )
    }
}
