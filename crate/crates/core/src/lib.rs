//! Numerical laboratory for the boundary difference-quotient operator
//! `Q_ζ f = (f − f(ζ)) / (z − ζ)` acting on model spaces `K_u = H² ⊖ uH²`.
//!
//! The crate is organised bottom-up:
//!
//! * [`inner`]: finite Blaschke products and single-atom singular inner
//!   functions, with closed-form boundary derivatives.
//! * [`clark`]: Clark measures `σ_α` (atoms and masses) by monotone phase
//!   root finding.
//! * [`modelspace`]: reproducing and boundary kernels, the Clark and
//!   Takenaka–Malmquist orthonormal bases, circle quadrature.
//! * [`qop`]: matrices of `Q_ζ`, the backward shift `X_u` and the resolvent
//!   `I + ζQ_ζ`, built analytically (arrowhead form) or by quadrature.
//! * [`spectral`]: singular values and the Möbius spectrum check.
//! * [`verify`]: experiment drivers that produce structured reports.
//! * [`cli`]: the `mslab` command-line front end.

// NaN must fail range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clark;
pub mod cli;
pub mod error;
pub mod format;
pub mod inner;
pub mod modelspace;
pub mod qop;
pub mod rng;
pub mod spectral;
pub mod verify;

pub use num_complex::Complex64;

pub use error::{MslabError, Result};
pub use inner::{BoundaryPoint, InnerFunction};
