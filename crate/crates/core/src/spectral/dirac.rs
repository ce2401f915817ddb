//! Fourier-diagonal Dirac and Laplace operators, the ordered Dirac spectrum,
//! spectral projections and fractional powers.
//!
//! Clifford convention: `c(e_j) = i sigma_j`, so `c(e_1) c(e_2) = -i sigma_3`
//! is the chirality operator and `c(X)c(Y) + c(Y)c(X) = -2 g(X, Y)`. On a plane
//! wave `exp(i xi.x)` the operator `D = c(e_1) d_1 + c(e_2) d_2` acts by the
//! Hermitian symbol `S(xi) = -(xi_1 sigma_1 + xi_2 sigma_2)` with eigenvalues
//! `+-|xi|`. Writing `xi_1 + i xi_2 = |xi| e^{i theta}`, the eigenvectors are
//! `(1, -e^{i theta})/sqrt(2)` for `+|xi|` and `(1, e^{i theta})/sqrt(2)` for `-|xi|`.

use std::cmp::Ordering;
use std::sync::Arc;

use num_complex::Complex64;

use super::fields::{ScalarField, SpinorField};
use super::geometry::TorusGeometry;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative width used to group numerically equal `|lambda|` into one level.
const LEVEL_TOL: f64 = 1e-12;

/// One nonzero Dirac eigenmode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    /// Nonzero index: `j > 0` for positive eigenvalues, `j < 0` for negative.
    pub index: i64,
    pub lambda: f64,
    /// Flat Fourier bin of the mode.
    pub bin: usize,
    /// Spinor frequency `m + delta` per direction.
    pub frequency: [f64; 2],
    pub polarization: [Complex64; 2],
}

/// Mode coefficients of a spinor, one positive and one negative coefficient
/// per Fourier bin, normalized so that `sum |a|^2 = ||psi||_{L2}^2`.
///
/// On the kernel bin of the periodic structure the two slots hold the
/// coefficients along `(1,0)` and `(0,1)` instead.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCoeffs {
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

impl ModeCoeffs {
    pub fn zeros(n: usize) -> Self {
        ModeCoeffs {
            plus: vec![ZERO; n],
            minus: vec![ZERO; n],
        }
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    /// Real inner product `Re sum conj(a) b`, equal to the L2 product.
    pub fn dot(&self, other: &ModeCoeffs) -> f64 {
        dot(&self.plus, &other.plus) + dot(&self.minus, &other.minus)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn axpy(&mut self, alpha: f64, other: &ModeCoeffs) {
        axpy(&mut self.plus, alpha, &other.plus);
        axpy(&mut self.minus, alpha, &other.minus);
    }

    pub fn scaled(&self, alpha: f64) -> ModeCoeffs {
        ModeCoeffs {
            plus: self.plus.iter().map(|z| z * alpha).collect(),
            minus: self.minus.iter().map(|z| z * alpha).collect(),
        }
    }

    pub fn positive_part(&self) -> ModeCoeffs {
        ModeCoeffs {
            plus: self.plus.clone(),
            minus: vec![ZERO; self.len()],
        }
    }

    pub fn negative_part(&self) -> ModeCoeffs {
        ModeCoeffs {
            plus: vec![ZERO; self.len()],
            minus: self.minus.clone(),
        }
    }
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn axpy(y: &mut [Complex64], alpha: f64, x: &[Complex64]) {
    y.iter_mut().zip(x).for_each(|(a, b)| *a += b * alpha);
}

/// Apply the Dirac operator by multiplying Fourier coefficients with the symbol.
pub fn dirac_apply(geometry: &TorusGeometry, psi: &SpinorField) -> Result<SpinorField> {
    psi.check_geometry(geometry)?;
    let [c0, c1] = psi.coefficients();
    let mut out0 = vec![ZERO; c0.len()];
    let mut out1 = vec![ZERO; c0.len()];
    for k in 0..c0.len() {
        let [x1, x2] = geometry.spinor_wavevector(k);
        out0[k] = -Complex64::new(x1, -x2) * c1[k];
        out1[k] = -Complex64::new(x1, x2) * c0[k];
    }
    Ok(SpinorField::from_coefficients(psi.geometry().clone(), [out0, out1]))
}

/// Apply the Laplacian `-|xi|^2` in Fourier space.
pub fn laplacian_apply(geometry: &TorusGeometry, u: &ScalarField) -> Result<ScalarField> {
    u.check_geometry(geometry)?;
    Ok(laplacian(u))
}

pub(crate) fn laplacian(u: &ScalarField) -> ScalarField {
    let g = u.geometry();
    let mut c = u.coefficients();
    for (k, z) in c.iter_mut().enumerate() {
        *z *= -g.scalar_wavenumber_sq(k);
    }
    ScalarField::from_coefficients(g.clone(), &c)
}

/// `||grad u||_{L2}^2` as a Fourier sum.
pub fn dirichlet_energy(u: &ScalarField) -> f64 {
    dirichlet_of(u.geometry(), u.values())
}

pub(crate) fn dirichlet_of(g: &TorusGeometry, values: &[f64]) -> f64 {
    let c = g.coarse.forward_real(values);
    g.volume()
        * c.iter()
            .enumerate()
            .map(|(k, z)| g.scalar_wavenumber_sq(k) * z.norm_sqr())
            .sum::<f64>()
}

/// `||u||_{H^1} = sqrt(mean(u)^2 + ||grad u||^2)`.
pub fn h1_norm(u: &ScalarField) -> f64 {
    let m = u.mean();
    (m * m + dirichlet_energy(u)).sqrt()
}

/// Ordered Dirac spectrum with eigenpolarizations per Fourier bin.
#[derive(Debug)]
pub struct DiracSpectrum {
    geometry: Arc<TorusGeometry>,
    abs_lambda: Vec<f64>,
    pol_plus: Vec<[Complex64; 2]>,
    pol_minus: Vec<[Complex64; 2]>,
    /// Non-kernel bins in mode order; positive mode `j` lives on `order[j-1]`
    /// and negative mode `-j` on the same bin.
    order: Vec<usize>,
    kernel_bins: Vec<usize>,
    /// Start offsets into `order` of each distinct level, plus a final sentinel.
    level_starts: Vec<usize>,
}

/// Enumerate and order all `2 N1 N2` Dirac modes of the geometry.
pub fn eigendecompose(geometry: &Arc<TorusGeometry>) -> DiracSpectrum {
    let n = geometry.len();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut abs_lambda = Vec::with_capacity(n);
    let mut pol_plus = Vec::with_capacity(n);
    let mut pol_minus = Vec::with_capacity(n);
    let mut kernel_bins = Vec::new();
    for k in 0..n {
        let [x1, x2] = geometry.spinor_wavevector(k);
        let r = x1.hypot(x2);
        abs_lambda.push(r);
        if r == 0.0 {
            kernel_bins.push(k);
            pol_plus.push([Complex64::new(1.0, 0.0), ZERO]);
            pol_minus.push([ZERO, Complex64::new(1.0, 0.0)]);
        } else {
            let e = Complex64::new(x1 / r, x2 / r);
            pol_plus.push([Complex64::new(s, 0.0), -e * s]);
            pol_minus.push([Complex64::new(s, 0.0), e * s]);
        }
    }

    let mut order: Vec<usize> = (0..n).filter(|&k| abs_lambda[k] > 0.0).collect();
    order.sort_by(|&a, &b| abs_lambda[a].partial_cmp(&abs_lambda[b]).unwrap_or(Ordering::Equal));
    let mut level_starts = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let base = abs_lambda[order[start]];
        let mut end = start + 1;
        while end < order.len() && abs_lambda[order[end]] <= base * (1.0 + LEVEL_TOL) {
            end += 1;
        }
        order[start..end].sort_by(|&a, &b| {
            let (fa, fb) = (geometry.spinor_frequency(a), geometry.spinor_frequency(b));
            fa[0].total_cmp(&fb[0]).then(fa[1].total_cmp(&fb[1]))
        });
        level_starts.push(start);
        start = end;
    }
    level_starts.push(order.len());

    DiracSpectrum {
        geometry: geometry.clone(),
        abs_lambda,
        pol_plus,
        pol_minus,
        order,
        kernel_bins,
        level_starts,
    }
}

impl DiracSpectrum {
    pub fn geometry(&self) -> &Arc<TorusGeometry> {
        &self.geometry
    }

    /// Complex dimension of `ker D`.
    pub fn kernel_dim(&self) -> usize {
        2 * self.kernel_bins.len()
    }

    /// Number of positive (equivalently negative) modes.
    pub fn num_positive(&self) -> usize {
        self.order.len()
    }

    pub(crate) fn require_kernel_free(&self) -> Result<()> {
        match self.kernel_dim() {
            0 => Ok(()),
            kernel_dim => Err(Error::KernelPresent { kernel_dim }),
        }
    }

    pub(crate) fn abs_lambda(&self) -> &[f64] {
        &self.abs_lambda
    }

    fn bin_of(&self, j: i64) -> Result<usize> {
        let r = j.unsigned_abs() as usize;
        if j == 0 || r > self.order.len() {
            return Err(Error::InvalidArgument(format!(
                "mode index {j} outside 1..={} in absolute value",
                self.order.len()
            )));
        }
        Ok(self.order[r - 1])
    }

    /// Eigenvalue `lambda_j`.
    pub fn eigenvalue(&self, j: i64) -> Result<f64> {
        let k = self.bin_of(j)?;
        Ok(self.abs_lambda[k].copysign(j as f64))
    }

    pub fn mode(&self, j: i64) -> Result<Mode> {
        let bin = self.bin_of(j)?;
        Ok(Mode {
            index: j,
            lambda: self.abs_lambda[bin].copysign(j as f64),
            bin,
            frequency: self.geometry.spinor_frequency(bin),
            polarization: if j > 0 {
                self.pol_plus[bin]
            } else {
                self.pol_minus[bin]
            },
        })
    }

    /// Smallest positive eigenvalue.
    pub fn lambda_1(&self) -> f64 {
        self.abs_lambda[self.order[0]]
    }

    /// All nonzero modes in the canonical order: increasing `|lambda|`, then
    /// positive before negative, then spinor frequency lexicographically.
    pub fn modes(&self) -> Vec<Mode> {
        let mut out = Vec::with_capacity(2 * self.order.len());
        for w in self.level_starts.windows(2) {
            for sign in [1i64, -1] {
                for r in w[0]..w[1] {
                    out.push(self.mode(sign * (r as i64 + 1)).expect("rank in range"));
                }
            }
        }
        out
    }

    /// Distinct positive eigenvalues, increasing.
    pub fn levels(&self) -> Vec<f64> {
        self.level_starts[..self.level_starts.len() - 1]
            .iter()
            .map(|&s| self.abs_lambda[self.order[s]])
            .collect()
    }

    /// Positive mode indices `j` belonging to distinct level `l` (0-based).
    pub fn level_modes(&self, l: usize) -> Vec<i64> {
        (self.level_starts[l]..self.level_starts[l + 1])
            .map(|r| r as i64 + 1)
            .collect()
    }

    /// Distance from `rho` to the nearest eigenvalue (including a zero
    /// eigenvalue when the kernel is nontrivial).
    pub fn distance_to_spectrum(&self, rho: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, f64::NAN);
        if !self.kernel_bins.is_empty() {
            best = (rho.abs(), 0.0);
        }
        for &k in &self.order {
            for lam in [self.abs_lambda[k], -self.abs_lambda[k]] {
                let d = (rho - lam).abs();
                if d < best.0 {
                    best = (d, lam);
                }
            }
        }
        best
    }

    /// Unit-L2 eigenspinor of mode `j`.
    pub fn eigenspinor(&self, j: i64) -> Result<SpinorField> {
        let k = self.bin_of(j)?;
        let mut c = ModeCoeffs::zeros(self.geometry.len());
        if j > 0 {
            c.plus[k] = Complex64::new(1.0, 0.0);
        } else {
            c.minus[k] = Complex64::new(1.0, 0.0);
        }
        Ok(self.synthesize(&c))
    }

    /// Spinor field -> mode coefficients.
    pub fn analyze(&self, psi: &SpinorField) -> ModeCoeffs {
        let [c0, c1] = psi.coefficients();
        let sv = self.geometry.volume().sqrt();
        let mut out = ModeCoeffs::zeros(c0.len());
        for k in 0..c0.len() {
            let (p, m) = (self.pol_plus[k], self.pol_minus[k]);
            out.plus[k] = (p[0].conj() * c0[k] + p[1].conj() * c1[k]) * sv;
            out.minus[k] = (m[0].conj() * c0[k] + m[1].conj() * c1[k]) * sv;
        }
        out
    }

    pub(crate) fn chi_coefficients(&self, a: &ModeCoeffs) -> [Vec<Complex64>; 2] {
        let isv = 1.0 / self.geometry.volume().sqrt();
        let n = a.len();
        let mut c0 = vec![ZERO; n];
        let mut c1 = vec![ZERO; n];
        for k in 0..n {
            let (p, m) = (self.pol_plus[k], self.pol_minus[k]);
            c0[k] = (p[0] * a.plus[k] + m[0] * a.minus[k]) * isv;
            c1[k] = (p[1] * a.plus[k] + m[1] * a.minus[k]) * isv;
        }
        [c0, c1]
    }

    pub(crate) fn from_chi_coefficients(&self, c: &[Vec<Complex64>; 2]) -> ModeCoeffs {
        let sv = self.geometry.volume().sqrt();
        let n = c[0].len();
        let mut out = ModeCoeffs::zeros(n);
        for k in 0..n {
            let (p, m) = (self.pol_plus[k], self.pol_minus[k]);
            out.plus[k] = (p[0].conj() * c[0][k] + p[1].conj() * c[1][k]) * sv;
            out.minus[k] = (m[0].conj() * c[0][k] + m[1].conj() * c[1][k]) * sv;
        }
        out
    }

    /// Mode coefficients -> spinor field.
    pub fn synthesize(&self, a: &ModeCoeffs) -> SpinorField {
        SpinorField::from_coefficients(self.geometry.clone(), self.chi_coefficients(a))
    }

    /// `D` on coefficients.
    pub(crate) fn apply_d(&self, a: &ModeCoeffs) -> ModeCoeffs {
        let mut out = a.clone();
        for k in 0..a.len() {
            let l = self.abs_lambda[k];
            out.plus[k] *= l;
            out.minus[k] *= -l;
        }
        out
    }

    /// `sum_j lambda_j |a_j|^2 = int <D psi, psi>`.
    pub(crate) fn dirac_form(&self, a: &ModeCoeffs) -> f64 {
        (0..a.len())
            .map(|k| self.abs_lambda[k] * (a.plus[k].norm_sqr() - a.minus[k].norm_sqr()))
            .sum()
    }

    /// `||psi||_{H^{1/2}}^2 = sum (1 + |lambda_j|) |a_j|^2`.
    pub(crate) fn h_half_sq(&self, a: &ModeCoeffs) -> f64 {
        (0..a.len())
            .map(|k| (1.0 + self.abs_lambda[k]) * (a.plus[k].norm_sqr() + a.minus[k].norm_sqr()))
            .sum()
    }

    /// `||psi||_{H^{1/2}} = sqrt(||psi||_{L2}^2 + || |D|^{1/2} psi ||_{L2}^2)`.
    pub fn h_half_norm(&self, psi: &SpinorField) -> Result<f64> {
        psi.check_geometry(&self.geometry)?;
        Ok(self.h_half_sq(&self.analyze(psi)).sqrt())
    }

    /// Split `psi = psi_plus + psi_minus` along the sign of the spectrum.
    pub fn project_pm(&self, psi: &SpinorField) -> Result<(SpinorField, SpinorField)> {
        self.require_kernel_free()?;
        psi.check_geometry(&self.geometry)?;
        let a = self.analyze(psi);
        Ok((
            self.synthesize(&a.positive_part()),
            self.synthesize(&a.negative_part()),
        ))
    }

    /// Scale mode `j` by `|lambda_j|^s`, `s` in `[-1, 1]`.
    pub fn frac_power_apply(&self, s: f64, psi: &SpinorField) -> Result<SpinorField> {
        if !(-1.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!("power {s} outside [-1, 1]")));
        }
        psi.check_geometry(&self.geometry)?;
        let mut a = self.analyze(psi);
        for &k in &self.kernel_bins {
            let kernel_part = a.plus[k].norm() + a.minus[k].norm();
            if s < 0.0 && kernel_part > 0.0 {
                return Err(Error::Singular {
                    what: "fractional power",
                    detail: format!(
                        "negative power {s} of |D| on a spinor with kernel component of size {kernel_part:.3e}"
                    ),
                });
            }
            if s > 0.0 {
                a.plus[k] = ZERO;
                a.minus[k] = ZERO;
            }
        }
        for &k in &self.order {
            let f = self.abs_lambda[k].powf(s);
            a.plus[k] *= f;
            a.minus[k] *= f;
        }
        Ok(self.synthesize(&a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_geometry;
    use std::f64::consts::PI;

    fn square(offset: (f64, f64)) -> Arc<TorusGeometry> {
        build_geometry(2.0 * PI, 2.0 * PI, 16, 16, offset).unwrap()
    }

    #[test]
    fn first_eigenvalue_half_offset() {
        let s = eigendecompose(&square((0.5, 0.0)));
        assert_eq!(s.lambda_1(), 0.5);
        assert_eq!(s.kernel_dim(), 0);
        let levels = s.levels();
        assert_eq!(levels[0], 0.5);
        assert!((levels[1] - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.level_modes(0), vec![1, 2]);
        assert_eq!(s.level_modes(1).len(), 4);
    }

    #[test]
    fn kernel_only_for_periodic_structure() {
        for (off, dim) in [((0.0, 0.0), 2), ((0.5, 0.0), 0), ((0.0, 0.5), 0), ((0.5, 0.5), 0)] {
            assert_eq!(eigendecompose(&square(off)).kernel_dim(), dim);
        }
    }

    #[test]
    fn mode_count_is_complete() {
        for off in [(0.0, 0.0), (0.5, 0.5)] {
            let s = eigendecompose(&square(off));
            assert_eq!(s.modes().len() + s.kernel_dim(), 2 * 256);
        }
    }

    #[test]
    fn tie_break_is_sign_then_frequency() {
        let s = eigendecompose(&square((0.5, 0.0)));
        let modes = s.modes();
        assert_eq!(modes[0].frequency, [-0.5, 0.0]);
        assert_eq!(modes[1].frequency, [0.5, 0.0]);
        assert!(modes[0].lambda > 0.0 && modes[2].lambda < 0.0);
        assert_eq!(modes[2].index, -1);
        assert_eq!(modes[2].bin, modes[0].bin);
    }

    #[test]
    fn eigenspinor_relation() {
        let g = square((0.5, 0.5));
        let s = eigendecompose(&g);
        for j in [1, -1, 7, -19, 100] {
            let phi = s.eigenspinor(j).unwrap();
            let lam = s.eigenvalue(j).unwrap();
            let dphi = dirac_apply(&g, &phi).unwrap();
            let err = (&dphi - &phi.scale(lam)).norm_l2();
            assert!(err <= 1e-12 * lam.abs(), "j={j} err={err}");
            assert!((phi.norm_l2() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn frac_power_refuses_kernel_for_negative_s() {
        let g = square((0.0, 0.0));
        let s = eigendecompose(&g);
        let psi = SpinorField::new(g.clone(), vec![Complex64::new(1.0, 0.0); 2 * g.len()]).unwrap();
        assert!(matches!(s.frac_power_apply(-0.5, &psi), Err(Error::Singular { .. })));
        assert!(matches!(s.project_pm(&psi), Err(Error::KernelPresent { kernel_dim: 2 })));
    }
}
