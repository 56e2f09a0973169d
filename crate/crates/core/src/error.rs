use thiserror::Error;

/// Errors raised by the cavity model, the hybrid-state simulator and the gate metrics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("scattering coefficients are not passive: |r|^2 + |t|^2 = {norm_sq} > 1")]
    InvalidCoefficients { norm_sq: f64 },

    #[error("spin index {index} out of range for {n_spins} spins")]
    SpinIndexOutOfRange { index: usize, n_spins: usize },

    #[error("unknown port `{0}`")]
    UnknownPort(String),

    #[error("inconsistent circuit: {0}")]
    InconsistentCircuit(String),

    #[error("cannot normalize a state with zero norm")]
    DegenerateState,

    #[error("coupling strength g is zero; critical photon number is undefined")]
    ZeroCoupling,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
