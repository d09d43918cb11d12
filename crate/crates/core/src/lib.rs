//! Secret-key rates of phase-encoded coherent-state QKD protocols.
//!
//! The library computes asymptotic Devetak-Winter rates for constellations of
//! `N` coherent states of fixed radius `z` and uniform phases, transmitted
//! over pure-loss and thermal-loss channels (entangling-cloner dilation), in
//! direct and reverse reconciliation, together with the Gaussian-modulation
//! baseline computed from covariance matrices.
//!
//! Modules:
//! - [`fock`]: truncated-Fock-space kernel (states, beam splitters, partial
//!   traces, entropies).
//! - [`constellation`]: the alphabet, its Gram/Gram-Schmidt machinery, average
//!   states and the continuous (Poisson) limit.
//! - [`channel`]: entangling-cloner propagation, heterodyne likelihoods,
//!   Bayes posteriors and Eve's outcome-conditioned states.
//! - [`rates`]: mutual information via polar quadrature, Holevo terms, the
//!   DR upper bound, realistic DR/RR rates and the Gaussian baseline.

pub mod channel;
pub mod constellation;
pub mod error;
pub mod fock;
pub mod rates;

pub use error::{Error, Result};
