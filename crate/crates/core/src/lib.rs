//! Mesh-free pricing of European options under multi-factor stochastic
//! models.
//!
//! Two localized radial basis function discretizations are provided:
//! RBF-FD ([`rbffd`]) with polyharmonic splines plus polynomials, and
//! RBF-PUM ([`rbfpum`]) with multiquadric patches blended by Shepard
//! weights. Both produce a sparse operator that is integrated in backward
//! time by a constant-coefficient BDF-2 scheme ([`stepper`]) with
//! ILU(0)-preconditioned GMRES ([`numerics`]).
//!
//! The [`harness`] module wires everything together for the built-in
//! problems in [`models`].

pub mod error;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod models;
pub mod numerics;
pub mod rbffd;
pub mod rbfpum;
pub mod stepper;

pub use error::{Error, Result};
