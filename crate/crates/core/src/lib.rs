//! Construction and verification of foliations by free-boundary hemispheres of
//! constant mean curvature near a boundary point of a Riemannian manifold.
//!
//! The manifold enters only through the curvature jet of its boundary at each
//! point ([`metric::BoundaryJet`]). A leaf is a radial graph over the unit upper
//! hemisphere, dilated by a radius `r` and centred at a boundary offset `tau`.
//! The graph function is found by a spectral Galerkin iteration on the
//! complement of the Jacobi kernel, and `tau` by Newton iteration on the
//! projection onto the kernel.

pub mod error;
pub mod scalar;
pub mod series;
pub mod metric;
pub mod hemisphere;
pub mod curvature;
pub mod solver;
#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
