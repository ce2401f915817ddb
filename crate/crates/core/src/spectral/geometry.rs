//! Flat spin tori: side lengths, grid resolution, spinor boundary phases and
//! the precomputed frequency and padding tables shared by every operator.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::{signed_frequency, Fft2};
use crate::error::{Error, Result};

/// Boundary behaviour of spinors along one period: periodic (`delta = 0`) or
/// antiperiodic (`delta = 1/2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinOffset {
    Periodic,
    Antiperiodic,
}

impl SpinOffset {
    pub fn from_delta(delta: f64) -> Result<Self> {
        if delta == 0.0 {
            Ok(SpinOffset::Periodic)
        } else if delta == 0.5 {
            Ok(SpinOffset::Antiperiodic)
        } else {
            Err(Error::InvalidGeometry(format!(
                "spin offset must be 0 or 1/2, got {delta}"
            )))
        }
    }

    pub fn delta(self) -> f64 {
        match self {
            SpinOffset::Periodic => 0.0,
            SpinOffset::Antiperiodic => 0.5,
        }
    }
}

/// A flat torus `[0,L1) x [0,L2)` sampled on an `N1 x N2` grid, together with
/// one of its four spin structures.
///
/// Fields refer to their geometry through an [`Arc`]; the 2x zero-padded grid
/// used for dealiased products is built here as well.
pub struct TorusGeometry {
    lengths: [f64; 2],
    resolution: [usize; 2],
    spin_offset: [SpinOffset; 2],
    pub(crate) coarse: Fft2,
    pub(crate) fine: Fft2,
    scalar_xi: Vec<[f64; 2]>,
    spinor_xi: Vec<[f64; 2]>,
    spinor_phase: Vec<Complex64>,
    scalar_pad: Vec<Vec<(usize, f64)>>,
    spinor_pad: Vec<usize>,
}

impl fmt::Debug for TorusGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGeometry")
            .field("lengths", &self.lengths)
            .field("resolution", &self.resolution)
            .field("spin_offset", &self.spin_offset)
            .finish()
    }
}

/// Per-direction map from a coarse bin to fine bins. Scalar fields split the
/// Nyquist bin symmetrically so that prolongation of a real field stays real.
fn pad_table(n: usize, split_nyquist: bool) -> Vec<Vec<(usize, f64)>> {
    let nf = 2 * n;
    (0..n)
        .map(|k| {
            let m = signed_frequency(k, n);
            let wrap = |m: i64| m.rem_euclid(nf as i64) as usize;
            if split_nyquist && m == -(n as i64) / 2 {
                vec![(wrap(m), 0.5), (wrap(-m), 0.5)]
            } else {
                vec![(wrap(m), 1.0)]
            }
        })
        .collect()
}

/// Build the torus geometry. Resolutions must be even and at least 8; spin
/// offsets must be 0 or 1/2.
pub fn build_geometry(
    l1: f64,
    l2: f64,
    n1: usize,
    n2: usize,
    spin_offset: (f64, f64),
) -> Result<Arc<TorusGeometry>> {
    if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
        return Err(Error::InvalidGeometry(format!(
            "side lengths must be positive and finite, got ({l1}, {l2})"
        )));
    }
    for n in [n1, n2] {
        if n % 2 != 0 {
            return Err(Error::InvalidGeometry(format!("odd resolution {n}")));
        }
        if n < 8 {
            return Err(Error::InvalidGeometry(format!(
                "resolution {n} below the minimum of 8"
            )));
        }
    }
    let offsets = [
        SpinOffset::from_delta(spin_offset.0)?,
        SpinOffset::from_delta(spin_offset.1)?,
    ];
    Ok(Arc::new(TorusGeometry::assemble([l1, l2], [n1, n2], offsets)))
}

impl TorusGeometry {
    fn assemble(lengths: [f64; 2], resolution: [usize; 2], spin_offset: [SpinOffset; 2]) -> Self {
        let [n1, n2] = resolution;
        let [l1, l2] = lengths;
        let [d1, d2] = [spin_offset[0].delta(), spin_offset[1].delta()];
        let mut scalar_xi = Vec::with_capacity(n1 * n2);
        let mut spinor_xi = Vec::with_capacity(n1 * n2);
        let mut spinor_phase = Vec::with_capacity(n1 * n2);
        for k1 in 0..n1 {
            let m1 = signed_frequency(k1, n1) as f64;
            for k2 in 0..n2 {
                let m2 = signed_frequency(k2, n2) as f64;
                scalar_xi.push([2.0 * PI * m1 / l1, 2.0 * PI * m2 / l2]);
                spinor_xi.push([2.0 * PI * (m1 + d1) / l1, 2.0 * PI * (m2 + d2) / l2]);
                // grid point (k1, k2) doubles as the spatial index here
                let phase = 2.0 * PI * (d1 * k1 as f64 / n1 as f64 + d2 * k2 as f64 / n2 as f64);
                spinor_phase.push(Complex64::from_polar(1.0, phase));
            }
        }

        let nf2 = 2 * n2;
        let (s1, s2) = (pad_table(n1, true), pad_table(n2, true));
        let mut scalar_pad = Vec::with_capacity(n1 * n2);
        for a in &s1 {
            for b in &s2 {
                let mut entries = Vec::with_capacity(a.len() * b.len());
                for &(f1, w1) in a {
                    for &(f2, w2) in b {
                        entries.push((f1 * nf2 + f2, w1 * w2));
                    }
                }
                scalar_pad.push(entries);
            }
        }
        let (p1, p2) = (pad_table(n1, false), pad_table(n2, false));
        let mut spinor_pad = Vec::with_capacity(n1 * n2);
        for a in &p1 {
            for b in &p2 {
                spinor_pad.push(a[0].0 * nf2 + b[0].0);
            }
        }

        TorusGeometry {
            lengths,
            resolution,
            spin_offset,
            coarse: Fft2::new(n1, n2),
            fine: Fft2::new(2 * n1, 2 * n2),
            scalar_xi,
            spinor_xi,
            spinor_phase,
            scalar_pad,
            spinor_pad,
        }
    }

    /// Same grid and spin structure with both side lengths multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Arc<TorusGeometry>> {
        build_geometry(
            self.lengths[0] * factor,
            self.lengths[1] * factor,
            self.resolution[0],
            self.resolution[1],
            (self.spin_offset[0].delta(), self.spin_offset[1].delta()),
        )
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    pub fn resolution(&self) -> [usize; 2] {
        self.resolution
    }

    pub fn spin_offset(&self) -> [SpinOffset; 2] {
        self.spin_offset
    }

    pub fn deltas(&self) -> [f64; 2] {
        [self.spin_offset[0].delta(), self.spin_offset[1].delta()]
    }

    pub fn volume(&self) -> f64 {
        self.lengths[0] * self.lengths[1]
    }

    /// Number of grid points `N1 * N2`.
    pub fn len(&self) -> usize {
        self.resolution[0] * self.resolution[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    pub(crate) fn fine_cell_area(&self) -> f64 {
        self.volume() / self.fine.len() as f64
    }

    /// Complex dimension of the Dirac kernel: 2 for the periodic-periodic
    /// structure, 0 otherwise.
    pub fn kernel_dim(&self) -> usize {
        if self.spin_offset == [SpinOffset::Periodic; 2] {
            2
        } else {
            0
        }
    }

    /// Physical coordinates of grid point `i` (row-major).
    pub fn grid_point(&self, i: usize) -> [f64; 2] {
        let [n1, n2] = self.resolution;
        let (i1, i2) = (i / n2, i % n2);
        [
            self.lengths[0] * i1 as f64 / n1 as f64,
            self.lengths[1] * i2 as f64 / n2 as f64,
        ]
    }

    /// Signed integer frequency of Fourier bin `k`.
    pub fn signed_mode(&self, k: usize) -> [i64; 2] {
        let [n1, n2] = self.resolution;
        [signed_frequency(k / n2, n1), signed_frequency(k % n2, n2)]
    }

    /// Spinor frequency `m + delta` of bin `k` (half-integers when antiperiodic).
    pub fn spinor_frequency(&self, k: usize) -> [f64; 2] {
        let m = self.signed_mode(k);
        let d = self.deltas();
        [m[0] as f64 + d[0], m[1] as f64 + d[1]]
    }

    pub(crate) fn scalar_wavenumber_sq(&self, k: usize) -> f64 {
        let [a, b] = self.scalar_xi[k];
        a * a + b * b
    }

    pub(crate) fn spinor_wavevector(&self, k: usize) -> [f64; 2] {
        self.spinor_xi[k]
    }

    pub(crate) fn spinor_phase(&self) -> &[Complex64] {
        &self.spinor_phase
    }

    /// Parameter equality: same lengths, resolution and spin structure.
    pub fn same_as(&self, other: &TorusGeometry) -> bool {
        std::ptr::eq(self, other)
            || (self.lengths == other.lengths
                && self.resolution == other.resolution
                && self.spin_offset == other.spin_offset)
    }

    // ----- dealiasing: prolongation to the padded grid and its adjoint -----

    /// Spectral interpolation of a real coarse field onto the padded grid.
    pub(crate) fn prolong_scalar(&self, values: &[f64]) -> Vec<f64> {
        let coeffs = self.coarse.forward_real(values);
        let mut fine = vec![Complex64::new(0.0, 0.0); self.fine.len()];
        for (c, entries) in coeffs.iter().zip(&self.scalar_pad) {
            for &(f, w) in entries {
                fine[f] += c * w;
            }
        }
        self.fine.inverse_real(&fine)
    }

    /// Adjoint of [`prolong_scalar`](Self::prolong_scalar) with respect to the
    /// coarse and fine L2 quadratures.
    pub(crate) fn restrict_scalar(&self, fine_values: &[f64]) -> Vec<f64> {
        let fine = self.fine.forward_real(fine_values);
        let coarse: Vec<Complex64> = self
            .scalar_pad
            .iter()
            .map(|entries| entries.iter().map(|&(f, w)| fine[f] * w).sum())
            .collect();
        self.coarse.inverse_real(&coarse)
    }

    /// Padded-grid values of a spinor component given its coarse coefficients.
    pub(crate) fn prolong_spinor_coeffs(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut fine = vec![Complex64::new(0.0, 0.0); self.fine.len()];
        for (c, &f) in coeffs.iter().zip(&self.spinor_pad) {
            fine[f] = *c;
        }
        self.fine.inverse(&mut fine);
        fine
    }

    /// Coarse coefficients of the truncation of a padded-grid spinor component.
    pub(crate) fn restrict_spinor_coeffs(&self, mut fine_values: Vec<Complex64>) -> Vec<Complex64> {
        self.fine.forward(&mut fine_values);
        self.spinor_pad.iter().map(|&f| fine_values[f]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_of_square_torus() {
        let g = build_geometry(2.0 * PI, 2.0 * PI, 16, 16, (0.5, 0.0)).unwrap();
        assert!((g.volume() - 39.47841760435743).abs() < 1e-12);
        assert_eq!(g.kernel_dim(), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            build_geometry(1.0, 1.0, 7, 16, (0.5, 0.5)),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(build_geometry(1.0, 1.0, 6, 16, (0.5, 0.5)).is_err());
        assert!(build_geometry(1.0, 1.0, 8, 8, (0.25, 0.5)).is_err());
        assert!(build_geometry(-1.0, 1.0, 8, 8, (0.5, 0.5)).is_err());
    }

    #[test]
    fn periodic_structure_flags_kernel() {
        let g = build_geometry(2.0 * PI, 2.0 * PI, 16, 16, (0.0, 0.0)).unwrap();
        assert_eq!(g.kernel_dim(), 2);
    }

    #[test]
    fn prolongation_is_exact_on_band_limited_fields() {
        let g = build_geometry(2.0, 3.0, 8, 8, (0.5, 0.0)).unwrap();
        let u: Vec<f64> = (0..g.len())
            .map(|i| {
                let [x, y] = g.grid_point(i);
                (PI * x).cos() + 0.3 * (2.0 * PI * y / 3.0).sin()
            })
            .collect();
        let fine = g.prolong_scalar(&u);
        // even fine points coincide with coarse points
        let nf2 = 16;
        for i in 0..g.len() {
            let (i1, i2) = (i / 8, i % 8);
            assert!((fine[(2 * i1) * nf2 + 2 * i2] - u[i]).abs() < 1e-13);
        }
        // restriction of a prolongation gives back the field when there is no Nyquist content
        let back = g.restrict_scalar(&fine);
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn restriction_is_adjoint_of_prolongation() {
        let g = build_geometry(1.0, 1.0, 8, 8, (0.5, 0.5)).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0).collect();
        let w: Vec<f64> = (0..g.fine.len()).map(|i| ((i * 5 % 11) as f64).sin()).collect();
        let lhs: f64 = g.prolong_scalar(&u).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            * g.fine_cell_area();
        let rhs: f64 =
            u.iter().zip(&g.restrict_scalar(&w)).map(|(a, b)| a * b).sum::<f64>() * g.cell_area();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
