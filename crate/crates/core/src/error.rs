use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("grid size must be odd and at least 3, got {0}")]
    InvalidGrid(usize),

    #[error("differentiation order must be 1, 2 or 3, got {0}")]
    InvalidOrder(u32),

    #[error("symbol `{label}` is not conjugate symmetric: imaginary residue {residue:e} relative to output")]
    Symbol { label: String, residue: f64 },

    #[error("state contains non-finite entries")]
    NonFinite,

    #[error("timestep must be positive and finite, got {0}")]
    InvalidTimestep(f64),

    #[error("inconsistent composition scheme: weights sum to {0}, expected 1")]
    InconsistentScheme(f64),

    #[error("singular Jacobian in Newton iteration")]
    SingularJacobian,

    #[error("finite-difference probe failed: {0}")]
    Probe(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
