//! Grid fields: real scalars `u` and two-component complex spinors `psi`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use super::geometry::TorusGeometry;
use crate::error::{Error, Result};

/// Real function on the periodic grid, stored row-major.
#[derive(Clone, Debug)]
pub struct ScalarField {
    geometry: Arc<TorusGeometry>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(geometry: Arc<TorusGeometry>, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "scalar field needs {} values, got {}",
                geometry.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field values"));
        }
        Ok(ScalarField { geometry, values })
    }

    pub(crate) fn from_raw(geometry: Arc<TorusGeometry>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), geometry.len());
        ScalarField { geometry, values }
    }

    pub fn zeros(geometry: Arc<TorusGeometry>) -> Self {
        Self::constant(geometry, 0.0)
    }

    pub fn constant(geometry: Arc<TorusGeometry>, c: f64) -> Self {
        let n = geometry.len();
        ScalarField {
            geometry,
            values: vec![c; n],
        }
    }

    /// Sample `f(x1, x2)` at the grid points.
    pub fn from_fn(geometry: Arc<TorusGeometry>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..geometry.len())
            .map(|i| {
                let [x, y] = geometry.grid_point(i);
                f(x, y)
            })
            .collect();
        Self::new(geometry, values)
    }

    /// Build from normalized Fourier coefficients; imaginary residue is dropped.
    pub fn from_coefficients(geometry: Arc<TorusGeometry>, coeffs: &[Complex64]) -> Self {
        let values = geometry.coarse.inverse_real(coeffs);
        ScalarField { geometry, values }
    }

    pub fn geometry(&self) -> &Arc<TorusGeometry> {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        self.geometry.coarse.forward_real(&self.values)
    }

    /// Grid mean, equal to the zero Fourier coefficient.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The mean-zero part `u - mean(u)`.
    pub fn oscillation(&self) -> ScalarField {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub(crate) fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            geometry: self.geometry.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geometry.cell_area()
    }

    /// L2 inner product by grid quadrature.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.geometry.cell_area()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()));
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.geometry.cell_area()).powf(1.0 / p)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &ScalarField) -> ScalarField {
        ScalarField {
            geometry: self.geometry.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> ScalarField {
        self.map(|v| alpha * v)
    }

    pub(crate) fn check_geometry(&self, geometry: &TorusGeometry) -> Result<()> {
        if self.geometry.same_as(geometry) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&ScalarField> for f64 {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        rhs.scale(self)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

/// Two-component complex spinor on the grid, stored component-major:
/// all of component 0 (row-major), then all of component 1.
///
/// Point values are those of the spinor itself, so on antiperiodic directions
/// they pick up the boundary phase `exp(2 pi i delta . x / L)`.
#[derive(Clone, Debug)]
pub struct SpinorField {
    geometry: Arc<TorusGeometry>,
    values: Vec<Complex64>,
}

impl SpinorField {
    pub fn new(geometry: Arc<TorusGeometry>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != 2 * geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "spinor field needs {} values, got {}",
                2 * geometry.len(),
                values.len()
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("spinor field values"));
        }
        Ok(SpinorField { geometry, values })
    }

    pub fn zeros(geometry: Arc<TorusGeometry>) -> Self {
        let n = 2 * geometry.len();
        SpinorField {
            geometry,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn geometry(&self) -> &Arc<TorusGeometry> {
        &self.geometry
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.geometry.len();
        &self.values[c * n..(c + 1) * n]
    }

    /// Fourier coefficients of the periodic factor `chi = exp(-i theta) psi`,
    /// one vector per component.
    pub fn coefficients(&self) -> [Vec<Complex64>; 2] {
        let phase = self.geometry.spinor_phase();
        [0, 1].map(|c| {
            let mut buf: Vec<Complex64> = self
                .component(c)
                .iter()
                .zip(phase)
                .map(|(z, p)| z * p.conj())
                .collect();
            self.geometry.coarse.forward(&mut buf);
            buf
        })
    }

    pub fn from_coefficients(geometry: Arc<TorusGeometry>, coeffs: [Vec<Complex64>; 2]) -> Self {
        let n = geometry.len();
        let mut values = Vec::with_capacity(2 * n);
        for mut buf in coeffs {
            geometry.coarse.inverse(&mut buf);
            values.extend(buf.iter().zip(geometry.spinor_phase()).map(|(z, p)| z * p));
        }
        SpinorField { geometry, values }
    }

    /// Pointwise `|psi|^2 = |psi_1|^2 + |psi_2|^2`.
    pub fn pointwise_norm_sq(&self) -> Vec<f64> {
        let (a, b) = (self.component(0), self.component(1));
        a.iter().zip(b).map(|(x, y)| x.norm_sqr() + y.norm_sqr()).collect()
    }

    /// Real part of the L2 Hermitian product, the real inner product used
    /// throughout (spinors are treated as a real Hilbert space).
    pub fn inner(&self, other: &SpinorField) -> f64 {
        self.inner_complex(other).re
    }

    /// Full Hermitian L2 product `int <psi, phi>`, conjugate-linear in `self`.
    pub fn inner_complex(&self, other: &SpinorField) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.geometry.cell_area()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        let pw = self.pointwise_norm_sq();
        if p.is_infinite() {
            return pw.iter().fold(0.0, |m: f64, v| m.max(v.sqrt()));
        }
        let s: f64 = pw.iter().map(|v| v.powf(p / 2.0)).sum();
        (s * self.geometry.cell_area()).powf(1.0 / p)
    }

    pub fn axpy(&self, alpha: f64, other: &SpinorField) -> SpinorField {
        SpinorField {
            geometry: self.geometry.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b * alpha)
                .collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> SpinorField {
        SpinorField {
            geometry: self.geometry.clone(),
            values: self.values.iter().map(|z| z * alpha).collect(),
        }
    }

    pub fn scale_complex(&self, alpha: Complex64) -> SpinorField {
        SpinorField {
            geometry: self.geometry.clone(),
            values: self.values.iter().map(|z| z * alpha).collect(),
        }
    }

    pub(crate) fn check_geometry(&self, geometry: &TorusGeometry) -> Result<()> {
        if self.geometry.same_as(geometry) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }
}

impl Add for &SpinorField {
    type Output = SpinorField;
    fn add(self, rhs: &SpinorField) -> SpinorField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpinorField {
    type Output = SpinorField;
    fn sub(self, rhs: &SpinorField) -> SpinorField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&SpinorField> for f64 {
    type Output = SpinorField;
    fn mul(self, rhs: &SpinorField) -> SpinorField {
        rhs.scale(self)
    }
}

impl Neg for &SpinorField {
    type Output = SpinorField;
    fn neg(self) -> SpinorField {
        SpinorField {
            geometry: self.geometry.clone(),
            values: self.values.iter().map(|z| -z).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_geometry;
    use std::f64::consts::PI;

    #[test]
    fn mean_is_zero_coefficient() {
        let g = build_geometry(2.0 * PI, 2.0 * PI, 8, 8, (0.5, 0.0)).unwrap();
        let u = ScalarField::from_fn(g, |x, y| 0.7 + x.sin() * (2.0 * y).cos()).unwrap();
        assert!((u.coefficients()[0].re - u.mean()).abs() < 1e-15);
        assert!((u.mean() - 0.7).abs() < 1e-14);
    }

    #[test]
    fn spinor_coefficients_round_trip() {
        let g = build_geometry(1.0, 2.0, 8, 8, (0.5, 0.5)).unwrap();
        let values: Vec<Complex64> = (0..2 * g.len())
            .map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64 * 0.17).cos()))
            .collect();
        let psi = SpinorField::new(g.clone(), values).unwrap();
        let back = SpinorField::from_coefficients(g, psi.coefficients());
        for (a, b) in psi.values().iter().zip(back.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let g = build_geometry(1.0, 1.0, 8, 8, (0.5, 0.5)).unwrap();
        let mut v = vec![0.0; 64];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite(_))));
    }
}
