use thiserror::Error;

/// Errors produced by state construction, linear algebra and rate assembly.
#[derive(Debug, Error)]
pub enum Error {
    /// The per-mode Fock dimension cannot hold the requested state within the
    /// configured tail tolerance.
    #[error(
        "Fock cutoff dim {dim} insufficient: discarded mass {discarded:.3e} exceeds \
         tolerance {tolerance:.3e} (need dim >= {required_dim})"
    )]
    CutoffInsufficient {
        dim: usize,
        required_dim: usize,
        discarded: f64,
        tolerance: f64,
    },

    /// A parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An API was called in a way that cannot be satisfied (e.g. empty trace set).
    #[error("usage error: {0}")]
    Usage(String),

    /// A matrix claimed to be a quantum state violates its invariants.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The Gram-Schmidt recursion met a negative residual norm beyond tolerance.
    #[error("inconsistent Gram matrix: {0}")]
    InconsistentGram(String),

    /// The Gram matrix is numerically rank-deficient; the orthonormalisation
    /// recursion would divide by a vanishing pivot.
    #[error("Gram matrix numerically singular at pivot {pivot} (value {value:.3e})")]
    SingularGram { pivot: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
