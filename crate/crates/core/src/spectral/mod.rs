//! Periodic grids, spinor boundary conditions and Fourier-diagonal operators.

mod dirac;
mod fft;
mod fields;
mod geometry;

pub use dirac::{
    dirac_apply, dirichlet_energy, eigendecompose, h1_norm, laplacian_apply, DiracSpectrum, Mode,
    ModeCoeffs,
};
pub(crate) use dirac::{dirichlet_of, dot, laplacian};
pub use fields::{ScalarField, SpinorField};
pub use geometry::{build_geometry, SpinOffset, TorusGeometry};
