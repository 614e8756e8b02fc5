//! Simulation library for matrix-valued stochastic processes related to the
//! Hua-Pickrell measures and the matrix Bougerol identity.
//!
//! The crate provides:
//!
//! * [`linalg`] — dense complex matrices, Hermitian eigendecomposition and
//!   principal PSD square roots at the small dimensions (N ≤ 16) this
//!   library targets;
//! * [`rng`] — counter-based reproducible random streams and the complex
//!   Brownian increment convention `E[dW dW̄] = 2 dt` used throughout;
//! * [`sde`] — Euler–Maruyama integration of the matrix exponential
//!   Brownian motion, the Hua-Pickrell matrix diffusion, its eigenvalue
//!   system, the squared-singular-value log dynamics and scalar drivers;
//! * [`functionals`] — Itô-sum accumulators for the exponential functionals
//!   (matrix Bougerol and Dufresne integrals) with an infinite-horizon tail
//!   policy;
//! * [`measures`] — closed-form (log-)densities of the target laws with
//!   quadrature normalization, CDFs and inverse-CDF sampling;
//! * [`stats`] — Kolmogorov–Smirnov tests, Lyapunov slope estimation and
//!   quadratic covariation summaries.

pub mod functionals;
pub mod linalg;
pub mod measures;
pub mod rng;
pub mod sde;
pub mod special;
pub mod stats;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// The iterative eigensolver exceeded its sweep budget.
    #[error("eigensolver failed to converge within {0} sweeps")]
    ConvergenceFailure(usize),
    /// A matrix claimed positive semidefinite has a significantly negative eigenvalue.
    #[error("matrix has negative eigenvalue {0:.3e} beyond tolerance")]
    NegativeEigenvalue(f64),
    /// A time step was non-positive or otherwise unusable.
    #[error("invalid step: {0}")]
    InvalidStep(String),
    /// A simulated state exceeded the overflow guard (1e150 max-entry).
    #[error("state overflow at t = {0:.6}")]
    Overflow(f64),
    /// An interacting-particle step could not restore strict ordering.
    #[error("eigenvalue collision at t = {0:.6}; step size too large")]
    CollisionAbort(f64),
    /// An infinite-horizon integral did not converge before the time cap.
    #[error("tail integral not converged at T = {achieved_t:.3}")]
    TailNotConverged { achieved_t: f64 },
    /// Quadrature normalization of a density failed to stabilize.
    #[error("density normalization failed: {0}")]
    NormalizationFailure(String),
    /// A statistical routine received fewer observations than required.
    #[error("insufficient sample: need {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    /// A slope estimate was requested on too short a horizon.
    #[error("insufficient horizon: need {needed:.1} time units after burn-in, got {got:.1}")]
    InsufficientHorizon { needed: f64, got: f64 },
    /// A matrix inverse was requested for a numerically singular matrix.
    #[error("singular matrix (pivot {0:.3e})")]
    SingularMatrix(f64),
    /// Malformed input to a simulation or statistics routine.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
