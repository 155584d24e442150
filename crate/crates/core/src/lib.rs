//! Certified eigenvalue bounds for second-order elliptic operators
//! `-div(A grad u) = lambda u` with homogeneous Dirichlet conditions on
//! polytopal domains.
//!
//! The pipeline is
//! mesh -> coefficient approximation -> finite element spaces (CR, GCR, P1)
//! -> sparse assembly -> generalized eigensolve -> bounds:
//!
//! * lower bounds from the generalized Crouzeix-Raviart (GCR) element, whose
//!   cell bubbles are adapted to a cell-wise constant approximation of `A`,
//!   followed by an explicit post-processing step;
//! * upper bounds from a Rayleigh-Ritz procedure on the conforming P1
//!   functions obtained by averaging the GCR eigenfunctions.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bounds;
pub mod coeff;
pub mod eigensolve;
mod error;
pub mod experiment;
pub mod fespace;
pub mod mesh;
pub mod quadrature;
pub mod report;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
