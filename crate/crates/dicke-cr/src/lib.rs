//! Collapse-revival dynamics, atom-field entanglement, and cat-state formation
//! in the non-resonant Dicke model.
//!
//! A pseudo-spin of length `j` (representing `2j` two-level atoms with level
//! splitting Δ) couples with strength λ to a single bosonic field mode of
//! frequency Ω:
//!
//! ```text
//! H = −Δ Jz + λ (a† + a) Jx + Ω a†a
//! ```
//!
//! Three independent methods evolve an initial product of a spin coherent
//! state and a field coherent state:
//!
//! * [`cheby`] — numerically exact propagation by Chebyshev expansion of
//!   `exp(−iH dt)` over a sparse product-basis Hamiltonian from [`model`];
//! * [`pert`] — closed-form second-order perturbation theory in the
//!   non-resonant regime: effective frequencies ω_E, ω_S, the branch-form
//!   wave function, collapse/revival formulas, and the generalized
//!   (co-/counter-rotating) machinery with a residual check;
//! * [`sca`] — semi-classical mean-field equations and the driven-atom
//!   (classical field) limit, integrated with fixed-step RK4.
//!
//! [`obs`] computes observables (spin expectations, field variance,
//! entanglement entropy, Schmidt decomposition, Husimi distributions), and
//! [`scenario`] orchestrates full runs behind the `dicke-cr` command line.
//!
//! Everything is deterministic: no randomness, fixed summation orders, and
//! bit-identical output files for identical configurations.

pub mod bessel;
pub mod cheby;
pub mod linalg;
pub mod model;
pub mod obs;
pub mod pert;
pub mod sca;
pub mod scenario;
pub mod states;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Spin length is not a non-negative half-integer, or is out of range.
    #[error("invalid spin length: {0}")]
    InvalidSpin(String),
    /// A parameter value violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    /// Operator/vector dimensions do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Product-basis dimension exceeds the supported maximum.
    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },
    /// Resonant parameters for which the perturbative formulas are singular.
    #[error("resonant parameters: {0}")]
    Resonance(String),
    /// Fock cutoff too small for the requested coherent amplitude or grid.
    #[error("Fock cutoff too small: {0}")]
    CutoffTooSmall(String),
    /// Requested tolerance cannot be met within the configured expansion order.
    #[error("tolerance unreachable: {0}")]
    ToleranceUnreachable(String),
    /// Perturbative validity bound violated (coupling too strong).
    #[error("perturbative validity violated: {0}")]
    ValidityViolation(String),
    /// A numerical method failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Malformed scenario configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// File input/output failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
