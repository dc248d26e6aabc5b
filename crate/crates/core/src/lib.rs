//! Dynamics of a spin-S system under the non-Hermitian Hamiltonian
//! `H = 2v*Sx - 2i*gamma*Sz`, which is PT-symmetric: eigenvalues are real
//! for `gamma < v`, purely imaginary for `gamma > v`, and coalesce at the
//! exceptional point `gamma = v`.
//!
//! The crate provides three independent propagator constructions that
//! cross-validate one another, density-matrix observables with the
//! normalized expectation convention `<A> = tr(rho A)/tr(rho)`, Ehrenfest
//! trajectories with their analytic circle geometry, and Husimi Q-function
//! machinery (two evaluation routes, grid sampling with exact quadrature,
//! characteristics, and a phase-space transport-equation residual check).
//!
//! Conventions fixed throughout:
//! - Dicke basis ordered `m = S, S-1, ..., -S` (descending).
//! - Clebsch-Gordan coefficients and spherical harmonics use the
//!   Condon-Shortley phase; spherical harmonics are orthonormal.
//! - Angles in radians; `theta` is the polar angle from the +z axis.

pub mod cg;
pub mod dd;
pub mod expm;
pub mod husimi;
pub mod model;
pub mod observables;
pub mod ode;
pub mod propagator;
pub mod quad;
pub mod spectrum;
pub mod sph;
pub mod spin;

use num_complex::Complex64;

/// Dense complex matrix used for operators, propagators, and states.
pub type CMat = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector used for state amplitudes.
pub type CVec = nalgebra::DVector<Complex64>;

/// Errors surfaced by constructors and numerical routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("spin must be a positive half-integer, got {0}")]
    InvalidSpin(f64),
    #[error("quantum number out of range: {0}")]
    QuantumNumber(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix exponential overflow: 1-norm {norm:.3e} exceeds the supported envelope")]
    ExpOverflow { norm: f64 },
    #[error("diagonalization propagator is undefined at the exceptional point gamma = v")]
    AtExceptionalPoint,
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },
    #[error("requested time {t} is outside the integrated range [0, {t_max}]")]
    OutOfRange { t: f64, t_max: f64 },
    #[error("trace too small to normalize: {0:.3e}")]
    VanishingTrace(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// True when `x` is an exact half-integer (2x integral) within f64 exactness.
pub(crate) fn is_half_integer(x: f64) -> bool {
    let doubled = 2.0 * x;
    doubled.fract() == 0.0 && doubled.abs() < 4.0e9
}
