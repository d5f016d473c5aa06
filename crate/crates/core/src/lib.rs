//! Rotationally symmetric harmonic maps from balls to spheres.
//!
//! The Dirichlet problem for `k`-rotationally symmetric maps reduces to the
//! damped pendulum `psi'' + (n-2) psi' - e_k sin(2 psi) = 0` in `t = ln r`.
//! This crate traces its canonical heteroclinic orbit, classifies the
//! equilibria, enumerates every Dirichlet solution for a boundary angle,
//! checks energies and variations, and solves the Hopf/Join boundary-value
//! problems on `(0, π/2)`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod dirichlet;
pub mod energy;
pub mod error;
pub mod exec;
pub mod hopfjoin;
pub mod integrator;
pub mod model;
pub mod quadrature;
pub mod tridiag;

pub use error::{Error, Result};
pub use model::{HopfJoinSpec, PhasePoint, ProblemSpec};
