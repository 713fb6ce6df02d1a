//! Self-similar blow-up profiles of `u_t = (u^m)_xx + |x|^sigma u^p`, `1 < p < m`.
//!
//! The profile ODE is studied through three equivalent autonomous systems
//! (see [`model`]). Profiles with an interface are found by shooting backward
//! from the interface ([`shooting`]) or by following the orbits leaving the
//! critical points P2 and P0 ([`orbits`]); [`bifurcation`] locates the weight
//! exponents at which the behaviour changes.

pub mod bifurcation;
pub mod cli;
pub mod error;
pub mod golden;
pub mod integrator;
pub mod invariants;
pub mod local_analysis;
pub mod model;
pub mod orbits;
pub mod shooting;

pub use error::{Error, Result};
