//! Pseudospectral solver for nontrivial critical points of the super-Liouville
//! functional
//!
//! ```text
//! J(u, psi) = int |grad u|^2 - 2u + e^{2u} + 2(<D psi, psi> - rho e^u |psi|^2)
//! ```
//!
//! on a flat spin torus, by min-max over the Nehari manifold.

pub mod census;
pub mod energy;
pub mod error;
mod linalg;
pub mod minmax;
pub mod nehari;
pub mod runner;
mod sampling;
pub mod spectral;

pub use energy::{Coupling, EnergyBreakdown};
pub use error::{Error, Result};
pub use nehari::NehariPoint;
pub use spectral::{
    build_geometry, dirac_apply, eigendecompose, laplacian_apply, DiracSpectrum, Mode, ModeCoeffs,
    ScalarField, SpinOffset, SpinorField, TorusGeometry,
};
