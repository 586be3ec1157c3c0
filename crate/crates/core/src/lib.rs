//! Finite-element toolkit for monotonicity-based shape reconstruction in the
//! partial-data anisotropic Calderón problem with complex (non-self-adjoint)
//! matrix-valued conductivities.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: triangulations, boundary arcs, element masks and the
//!   topological predicates used by the reconstruction (outer shape,
//!   connected complement, admissible test inclusions).
//! * [`coeff`]: piecewise-constant 2×2 complex coefficient fields, their
//!   self-/skew-adjoint split, bound extraction, phantoms and test coefficients.
//! * [`forward`]: conforming P1 Galerkin solver for the Neumann problem,
//!   including the perfectly insulating / perfectly conducting variants.
//! * [`ndmap`]: discrete Neumann-to-Dirichlet operators and all test operators.
//! * [`mono`]: semidefiniteness tests and the reconstruction procedures.
//! * [`locpot`]: numerically optimised localized potentials.
//! * [`verify`]: numerical oracles for the monotonicity inequalities.

pub mod coeff;
pub mod error;
pub mod forward;
pub mod linalg;
pub mod locpot;
pub mod mesh;
pub mod mono;
pub mod ndmap;
pub mod verify;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
