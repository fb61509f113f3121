//! Numerics for weak geodesics between Kähler potentials.
//!
//! The crate covers harmonic analysis on the strip `0 < Im s < 1`
//! ([`strip_harmonic`]), discrete complex calculus on `[0,1] × torus`
//! ([`local_model`]), the Hessian obstruction at an isolated fixed point of
//! a holomorphic involution ([`obstruction`]), an explicit family showing
//! that obstruction is sharp ([`sharp_family`]), a discrete envelope solver
//! for the homogeneous complex Monge–Ampère boundary problem
//! ([`geodesic_envelope`]) and diagnostics on its output
//! ([`regularity_probe`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod geodesic_envelope;
pub mod io;
pub mod local_model;
pub mod obstruction;
pub mod quadrature;
pub mod regularity_probe;
pub mod sharp_family;
pub mod strip_harmonic;

pub use error::{Error, Result};
pub use local_model::{Grid, GridFunction, GridSlice, KahlerCoefficient, ReducedHessian, Topology};
pub use quadrature::QuadratureSpec;

/// Crate version, embedded in every emitted artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
