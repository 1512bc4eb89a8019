//! Geodesics on weakly deformed spheres and their averaged description.
//!
//! A particle moving freely on `Σ x_i² - 1 + ε ψ(x) = 0` follows, over short
//! times, a great circle whose normal is its angular momentum `L = x × ẋ`.
//! Averaging the slow drift of `L` over one revolution gives a one degree of
//! freedom Hamiltonian flow on the momentum sphere whose Hamiltonian is the
//! Funk transform (great-circle integral) of `ψ`.
//!
//! * [`surface`]: the deformation polynomial and the implicit surface.
//! * [`dynamics`]: full constrained geodesic motion.
//! * [`funk`]: the Funk transform and its identities.
//! * [`averaged`]: reduced Hamiltonian, averaged field, reduced flow.
//! * [`portrait`]: sampling, critical points and contours of the Hamiltonian.
//! * [`harness`]: comparison of the full and averaged dynamics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaged;
pub mod dynamics;
pub mod error;
pub mod funk;
pub mod harness;
pub mod portrait;
pub mod sampling;
pub mod surface;

pub use error::{Error, Result};
