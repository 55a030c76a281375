use thiserror::Error;

/// Errors raised by operator construction, model validation and the
/// numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("full Hilbert space for n = {n} exceeds the cap of {cap} qubits")]
    DimensionCap { n: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("spectrum is degenerate (min level spacing {spacing:.3e}); exact gauge potential undefined")]
    DegenerateSpectrum { spacing: f64 },

    #[error("eigendecomposition failed to converge")]
    Eigendecomposition,

    #[error("norm drift {drift:.3e} at t = {time}")]
    NormDrift { drift: f64, time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
