//! Boundary null control of a heat equation with an interior point mass.
//!
//! Two heat equations on `(−1, 0)` and `(0, 1)` are coupled through a point
//! mass at `x = 0` whose temperature `z` obeys `ż = v'(0) − u'(0)`, with
//! `u(0) = v(0) = z` and `u(−1) = 0`.  The control acts at `x = 1` either as a
//! Dirichlet value or as a Neumann flux.
//!
//! * [`spectrum`] — eigenvalues/eigenvectors of the hybrid operator.
//! * [`state`] — grid states, inner products, modal projection and evolution.
//! * [`moment`] — moment problem and min-norm control synthesis.
//! * [`pde`] — independent finite-difference solvers (point mass and ε-density).
//! * [`verify`] — duality identity, observability constants, null-control verdicts.
//! * [`io`] — CSV/JSON writers and readers.

pub mod error;
pub mod io;
pub mod linalg;
pub mod moment;
pub mod pde;
pub mod precision;
pub mod quadrature;
pub mod spectrum;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use precision::Precision;
pub use spectrum::{BoundaryCase, EigenPair, ModeKind};
