//! Singly periodic genus-one helicoid.
//!
//! The surface is built from Weierstrass data on a rhombic torus. Two real
//! period conditions fix the torus shape `rho` and the puncture parameter
//! `lambda`; once they are solved the immersion is integrated over one graph
//! piece of the surface, extended by its Euclidean symmetries and stacked
//! along the vertical period.
//!
//! Module map:
//!
//! * [`params`] scalar parameters and derived constants
//! * [`quadrature`] tanh-sinh and graded Gauss-Legendre integration
//! * [`periods`] the reduced period integrals `F`, `G` and their solver
//! * [`torus`] flat coordinate, elliptic functions `z`, `w`, symmetries, paths
//! * [`ode`] Dormand-Prince integrator used for interior charts
//! * [`weierstrass`] Gauss map, height differential, periods
//! * [`mesh`] triangulation, symmetry assembly and export
//! * [`verify`] numerical checks of the geometric claims
//! * [`cli`] command line front end

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod mesh;
pub mod ode;
pub mod params;
pub mod periods;
pub mod quadrature;
pub mod torus;
pub mod verify;
pub mod weierstrass;

pub use error::{Error, Result};
pub use params::SurfaceParams;
pub use quadrature::{QuadratureResult, QuadratureSpec};
