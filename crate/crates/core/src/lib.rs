//! Numerical toolkit for the radial Emden-Fowler equation on spherical caps
//! of S^N.
//!
//! The cap problem is reduced to the radial ODE
//!
//! ```text
//! U'' + (N-1) (cos t / sin t) U' + |U|^{p-1} U = 0,   U(0) = G,  U'(0) = 0,
//! ```
//!
//! whose first zero T(G) defines the bifurcation branch, together with its
//! stereographic and Emden reformulations. The crate computes:
//!
//! * derived exponents and regime classification ([`model`]),
//! * adaptive shooting integrations with first-zero detection ([`integrate`]),
//! * the bifurcation branch, turning points, and branch inversion ([`branch`]),
//! * the singular solution and its first zero ([`singular`]),
//! * Emden phase-plane orbits, Lyapunov/energy monitors, and intersection
//!   numbers ([`phase`]),
//! * the cap eigenvalue problem, Pohozaev functional, nonexistence
//!   certificates, and the p -> 1 limit objects ([`spectral`]).
//!
//! [`verify`] bundles the acceptance checks run by the CLI `verify` command
//! and the `acceptance` integration test.

// `!(x > 0.0)`-style guards are deliberate: they reject NaN along with the
// out-of-range sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branch;
pub mod error;
#[cfg(test)]
pub(crate) mod testutil;
pub mod integrate;
pub mod io;
pub mod model;
pub mod ode;
pub mod phase;
pub mod singular;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use model::{classify, compute_exponents, Exponents, Params, Regime};
