//! The functional `J_rho`, its `F + Q` split, Euler-Lagrange residuals and
//! gradients, the constant-factor conformal check and the Moser-Trudinger probe.
//!
//! Nonlinear products are evaluated on the 2x padded grid: with `I` the
//! spectral prolongation and `I*` its L2 adjoint,
//!
//! ```text
//! int e^{2u}           := int_fine e^{2 Iu}
//! int e^u |psi|^2      := int_fine e^{Iu} |I psi|^2
//! e^{2u}   (gradient)  := I*(e^{2 Iu})
//! e^u |psi|^2          := I*(e^{Iu} |I psi|^2)
//! e^u psi              := I*(e^{Iu} I psi)
//! ```
//!
//! so the discrete gradient is the exact derivative of the discrete functional.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::band_scalar;
use crate::spectral::{
    dirichlet_energy, dirichlet_of, eigendecompose, laplacian, DiracSpectrum, ModeCoeffs, ScalarField,
    SpinorField, TorusGeometry,
};

/// Largest admissible `max(2u)` before exponentials are refused.
pub const OVERFLOW_GUARD: f64 = 300.0;

/// The coupling constant `rho` together with the spectrum it must avoid.
#[derive(Clone, Debug)]
pub struct Coupling {
    rho: f64,
    curvature: f64,
    gap_tol: f64,
    spectrum: Arc<DiracSpectrum>,
}

impl Coupling {
    pub const DEFAULT_GAP_TOL: f64 = 1e-6;

    pub fn new(spectrum: Arc<DiracSpectrum>, rho: f64) -> Result<Self> {
        Self::with_gap_tol(spectrum, rho, Self::DEFAULT_GAP_TOL)
    }

    pub fn with_gap_tol(spectrum: Arc<DiracSpectrum>, rho: f64, gap_tol: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
        }
        if !(gap_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("gap_tol must be >= 0, got {gap_tol}")));
        }
        let (dist, nearest) = spectrum.distance_to_spectrum(rho);
        if dist < gap_tol {
            return Err(Error::CouplingOnSpectrum {
                rho,
                nearest,
                gap_tol,
            });
        }
        Ok(Coupling {
            rho,
            curvature: -1.0,
            gap_tol,
            spectrum,
        })
    }

    /// Replace the constant background curvature (default `-1`).
    pub fn with_curvature(mut self, curvature: f64) -> Self {
        self.curvature = curvature;
        self
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn gap_tol(&self) -> f64 {
        self.gap_tol
    }

    pub fn spectrum(&self) -> &Arc<DiracSpectrum> {
        &self.spectrum
    }

    pub fn geometry(&self) -> &Arc<TorusGeometry> {
        self.spectrum.geometry()
    }

    pub(crate) fn check(&self, u: &ScalarField, psi: &SpinorField) -> Result<()> {
        u.check_geometry(self.geometry())?;
        psi.check_geometry(self.geometry())
    }
}

/// `J = F + Q` and its individual integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    /// `int |grad u|^2`
    pub dirichlet: f64,
    /// `2 K vol mean(u)`, i.e. `-2 int u` for `K = -1`
    pub linear_term: f64,
    /// `int e^{2u}`
    pub exp_term: f64,
    /// `2 int <D psi, psi>`
    pub dirac_term: f64,
    /// `-2 rho int e^u |psi|^2`
    pub coupling_term: f64,
}

/// `e^{Iu}` on the padded grid, shared by every product involving `u`.
#[derive(Clone, Debug)]
pub(crate) struct Background {
    geometry: Arc<TorusGeometry>,
    exp_u: Vec<f64>,
    /// Set when `u` is exactly constant: products reduce to scalings.
    constant: Option<f64>,
}

impl Background {
    pub fn new(u: &ScalarField) -> Result<Self> {
        let max_u = u.max();
        if !max_u.is_finite() || 2.0 * max_u > OVERFLOW_GUARD {
            return Err(Error::Overflow { max_u });
        }
        let geometry = u.geometry().clone();
        if u.is_constant() {
            let c = u.values()[0];
            return Ok(Background {
                exp_u: vec![c.exp(); geometry.fine.len()],
                geometry,
                constant: Some(c),
            });
        }
        let exp_u = geometry.prolong_scalar(u.values()).into_iter().map(f64::exp).collect();
        Ok(Background {
            geometry,
            exp_u,
            constant: None,
        })
    }

    /// Padded-grid values of `e^{Iu}`.
    pub fn exp_u(&self) -> &[f64] {
        &self.exp_u
    }

    pub fn mean_exp_u(&self) -> f64 {
        self.exp_u.iter().sum::<f64>() / self.exp_u.len() as f64
    }

    pub fn max_exp_u(&self) -> f64 {
        self.exp_u.iter().copied().fold(0.0, f64::max)
    }

    /// `int_fine e^{2 Iu}`.
    pub fn exp2_integral(&self) -> f64 {
        match self.constant {
            Some(c) => self.geometry.volume() * (2.0 * c).exp(),
            None => self.exp_u.iter().map(|e| e * e).sum::<f64>() * self.geometry.fine_cell_area(),
        }
    }

    /// `I*(e^{2 Iu})`.
    pub fn exp2_restricted(&self) -> Vec<f64> {
        match self.constant {
            Some(c) => vec![(2.0 * c).exp(); self.geometry.len()],
            None => {
                let sq: Vec<f64> = self.exp_u.iter().map(|e| e * e).collect();
                self.geometry.restrict_scalar(&sq)
            }
        }
    }

    /// `I*(w e^{Iu})` for a padded-grid weight `w`.
    pub fn restrict_weighted(&self, w: &[f64]) -> Vec<f64> {
        let prod: Vec<f64> = w.iter().zip(&self.exp_u).map(|(a, b)| a * b).collect();
        self.geometry.restrict_scalar(&prod)
    }

    /// Padded-grid values of both components of the periodic factor of `a`.
    pub fn spinor_fine(spectrum: &DiracSpectrum, a: &ModeCoeffs) -> [Vec<Complex64>; 2] {
        let g = spectrum.geometry();
        spectrum.chi_coefficients(a).map(|c| g.prolong_spinor_coeffs(&c))
    }

    /// `M_u a := I*(e^{Iu} I a)` in mode coefficients.
    pub fn mult(&self, spectrum: &DiracSpectrum, a: &ModeCoeffs) -> ModeCoeffs {
        if let Some(c) = self.constant {
            return a.scaled(c.exp());
        }
        let fine = Self::spinor_fine(spectrum, a);
        self.mult_fine(spectrum, fine)
    }

    /// `I*(e^{Iu} f)` for padded-grid spinor values `f`, in mode coefficients.
    pub fn mult_fine(&self, spectrum: &DiracSpectrum, fine: [Vec<Complex64>; 2]) -> ModeCoeffs {
        let chi = fine.map(|mut comp| {
            comp.iter_mut().zip(&self.exp_u).for_each(|(z, e)| *z *= *e);
            self.geometry.restrict_spinor_coeffs(comp)
        });
        spectrum.from_chi_coefficients(&chi)
    }

    /// `int_fine e^{Iu} |I psi|^2` from padded-grid spinor values.
    pub fn density_integral(&self, fine: &[Vec<Complex64>; 2]) -> f64 {
        let s: f64 = fine[0]
            .iter()
            .zip(&fine[1])
            .zip(&self.exp_u)
            .map(|((a, b), e)| e * (a.norm_sqr() + b.norm_sqr()))
            .sum();
        s * self.geometry.fine_cell_area()
    }

    /// `I*(e^{Iu} |I psi|^2)`.
    pub fn density_restricted(&self, fine: &[Vec<Complex64>; 2]) -> Vec<f64> {
        let w: Vec<f64> = fine[0].iter().zip(&fine[1]).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
        self.restrict_weighted(&w)
    }
}

/// Evaluation of `J` and its derivatives at one point, in mode coordinates.
pub(crate) struct PointEval {
    pub breakdown: EnergyBreakdown,
    /// `Delta u - I*(e^{2Iu}) - K + rho I*(e^{Iu}|psi|^2)`
    pub r_u: Vec<f64>,
    /// `D psi - rho M_u psi`
    pub r_psi: ModeCoeffs,
}

pub(crate) fn evaluate_modes(
    coupling: &Coupling,
    u: &ScalarField,
    a: &ModeCoeffs,
    bg: &Background,
    with_residual: bool,
) -> PointEval {
    let g = coupling.geometry();
    let spectrum = coupling.spectrum();
    let rho = coupling.rho;
    let dirichlet = dirichlet_energy(u);
    let linear_term = 2.0 * coupling.curvature * g.volume() * u.mean();
    let exp_term = bg.exp2_integral();
    let dirac_term = 2.0 * spectrum.dirac_form(a);
    let zero_spinor = a.norm_sq() == 0.0;
    let fine = (!zero_spinor).then(|| Background::spinor_fine(spectrum, a));
    let coupling_term = match (&fine, bg.constant) {
        (None, _) => 0.0,
        (Some(_), Some(c)) => -2.0 * rho * c.exp() * a.norm_sq(),
        (Some(fine), None) => -2.0 * rho * bg.density_integral(fine),
    };
    let f = dirichlet + linear_term + exp_term;
    let q = dirac_term + coupling_term;
    let breakdown = EnergyBreakdown {
        j: f + q,
        f,
        q,
        dirichlet,
        linear_term,
        exp_term,
        dirac_term,
        coupling_term,
    };
    if !with_residual {
        return PointEval {
            breakdown,
            r_u: Vec::new(),
            r_psi: ModeCoeffs::zeros(0),
        };
    }

    let lap = laplacian(u);
    let e2 = bg.exp2_restricted();
    let k = coupling.curvature;
    let mut r_u: Vec<f64> = lap.values().iter().zip(&e2).map(|(l, e)| l - e - k).collect();
    let mut r_psi = spectrum.apply_d(a);
    if let Some(fine) = fine {
        let w = bg.density_restricted(&fine);
        let ma = match bg.constant {
            Some(c) => a.scaled(c.exp()),
            None => bg.mult_fine(spectrum, fine),
        };
        r_u.iter_mut().zip(&w).for_each(|(r, w)| *r += rho * w);
        r_psi.axpy(-rho, &ma);
    }
    PointEval {
        breakdown,
        r_u,
        r_psi,
    }
}

/// Evaluate `J_rho(u, psi)` with its breakdown.
pub fn evaluate(coupling: &Coupling, u: &ScalarField, psi: &SpinorField) -> Result<EnergyBreakdown> {
    coupling.check(u, psi)?;
    let bg = Background::new(u)?;
    let a = coupling.spectrum.analyze(psi);
    let e = evaluate_modes(coupling, u, &a, &bg, false).breakdown;
    if !e.j.is_finite() {
        return Err(Error::NonFinite("energy evaluation"));
    }
    Ok(e)
}

/// Euler-Lagrange residuals `(r_u, r_psi)`; both vanish exactly at solutions.
pub fn el_residual(
    coupling: &Coupling,
    u: &ScalarField,
    psi: &SpinorField,
) -> Result<(ScalarField, SpinorField)> {
    coupling.check(u, psi)?;
    let bg = Background::new(u)?;
    let a = coupling.spectrum.analyze(psi);
    let ev = evaluate_modes(coupling, u, &a, &bg, true);
    let g = coupling.geometry().clone();
    let r_u = ScalarField::new(g, ev.r_u).map_err(|_| Error::NonFinite("residual"))?;
    Ok((r_u, coupling.spectrum.synthesize(&ev.r_psi)))
}

/// `||r_u||_{L2} + ||r_psi||_{L2}`.
pub fn residual_norm(coupling: &Coupling, u: &ScalarField, psi: &SpinorField) -> Result<f64> {
    let (ru, rp) = el_residual(coupling, u, psi)?;
    Ok(ru.norm_l2() + rp.norm_l2())
}

pub(crate) fn residual_norm_modes(coupling: &Coupling, ev: &PointEval) -> f64 {
    let ca = coupling.geometry().cell_area();
    (ev.r_u.iter().map(|r| r * r).sum::<f64>() * ca).sqrt() + ev.r_psi.norm_sq().sqrt()
}

/// L2 Riesz representatives `g_u = -2 r_u`, `g_psi = 4 r_psi` of `dJ`.
pub fn gradient(
    coupling: &Coupling,
    u: &ScalarField,
    psi: &SpinorField,
) -> Result<(ScalarField, SpinorField)> {
    let (ru, rp) = el_residual(coupling, u, psi)?;
    Ok((ru.scale(-2.0), rp.scale(4.0)))
}

/// Transport a solution to the torus with lengths scaled by `e^v` (metric
/// `e^{2v} g`) via `u - v`, `e^{-v/2} psi`, curvature `K e^{-2v}`, and return
/// the transformed Euler-Lagrange residual norm.
pub fn conformal_rescale_check(
    coupling: &Coupling,
    u: &ScalarField,
    psi: &SpinorField,
    v: f64,
) -> Result<f64> {
    const INPUT_TOL: f64 = 1e-6;
    if !v.is_finite() {
        return Err(Error::InvalidArgument(format!("conformal factor {v} is not finite")));
    }
    let input = residual_norm(coupling, u, psi)?;
    if input > INPUT_TOL {
        return Err(Error::InvalidArgument(format!(
            "conformal check needs an approximate solution; residual {input:.3e} exceeds {INPUT_TOL:e}"
        )));
    }
    let geometry = coupling.geometry().scaled(v.exp())?;
    let spectrum = Arc::new(eigendecompose(&geometry));
    let scaled = Coupling::with_gap_tol(spectrum, coupling.rho, coupling.gap_tol)?
        .with_curvature(coupling.curvature * (-2.0 * v).exp());
    let u_t = ScalarField::new(geometry.clone(), u.values().iter().map(|x| x - v).collect())?;
    let psi_t = SpinorField::new(geometry, psi.scale((-0.5 * v).exp()).into_values())?;
    residual_norm(&scaled, &u_t, &psi_t)
}

/// Outcome of the Moser-Trudinger probe.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MtProbe {
    /// Max over samples of `8 pi log int e^u - (1/2) ||grad u||^2`.
    pub fitted_c: f64,
    /// Probe value of `u = 0`, i.e. `8 pi log vol`.
    pub zero_value: f64,
    pub samples: usize,
    /// Samples whose doubled profile `2u` exceeds `fitted_c`.
    pub ray_violations: usize,
    /// `8 pi log int e^u - (1/2) ||grad u||^2` per sample.
    #[serde(skip)]
    pub values: Vec<f64>,
}

fn mt_value(g: &TorusGeometry, u: &[f64]) -> f64 {
    let fine = g.prolong_scalar(u);
    let integral = fine.iter().map(|x| x.exp()).sum::<f64>() * g.fine_cell_area();
    8.0 * PI * integral.ln() - 0.5 * dirichlet_of(g, u)
}

/// Empirical constant in `8 pi log int e^u <= (1/2) ||grad u||^2 + C` over
/// random band-limited mean-zero `u`. Reproducible for a fixed seed.
pub fn moser_trudinger_probe(geometry: &Arc<TorusGeometry>, samples: usize, seed: u64) -> Result<f64> {
    Ok(moser_trudinger_report(geometry, samples, seed)?.fitted_c)
}

pub fn moser_trudinger_report(geometry: &Arc<TorusGeometry>, samples: usize, seed: u64) -> Result<MtProbe> {
    const BAND: i64 = 4;
    const MAX_GRADIENT_NORM: f64 = 8.0;
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("probe needs at least 100 samples, got {samples}")));
    }
    let g = geometry.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero_value = 8.0 * PI * g.volume().ln();
    let mut profiles = Vec::with_capacity(samples);
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let shape = band_scalar(g, &mut rng, BAND, false);
        let norm = dirichlet_of(g, &shape).sqrt();
        let amp = rng.gen_range(0.0..MAX_GRADIENT_NORM) / norm;
        let u: Vec<f64> = shape.iter().map(|x| amp * x).collect();
        values.push(mt_value(g, &u));
        profiles.push(u);
    }
    let fitted_c = values.iter().copied().fold(zero_value, f64::max);
    if !fitted_c.is_finite() {
        return Err(Error::NonFinite("Moser-Trudinger probe"));
    }
    let ray_violations = profiles
        .iter()
        .filter(|u| {
            let doubled: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
            mt_value(g, &doubled) > fitted_c
        })
        .count();
    Ok(MtProbe {
        fitted_c,
        zero_value,
        samples,
        ray_violations,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_geometry;

    fn setup(rho: f64) -> Coupling {
        let g = build_geometry(2.0 * PI, 2.0 * PI, 16, 16, (0.5, 0.0)).unwrap();
        Coupling::new(Arc::new(eigendecompose(&g)), rho).unwrap()
    }

    #[test]
    fn trivial_point() {
        let c = setup(0.25);
        let g = c.geometry().clone();
        let e = evaluate(&c, &ScalarField::zeros(g.clone()), &SpinorField::zeros(g.clone())).unwrap();
        assert_eq!(e.j, g.volume());
        let (ru, rp) = el_residual(&c, &ScalarField::zeros(g.clone()), &SpinorField::zeros(g)).unwrap();
        assert!(ru.values().iter().all(|&x| x == 0.0));
        assert!(rp.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn constant_plane_wave_energy() {
        let c = setup(0.25);
        let g = c.geometry().clone();
        let phi = c.spectrum().eigenspinor(1).unwrap();
        let (ub, s) = (0.8, 3.0);
        let u = ScalarField::constant(g.clone(), ub);
        let e = evaluate(&c, &u, &phi.scale(s)).unwrap();
        let expected = g.volume() * ((2.0 * ub).exp() - 2.0 * ub) - 2.0 * (0.25 * ub.exp() - 0.5) * s * s;
        assert!((e.j - expected).abs() < 1e-12 * expected.abs());
        assert!((e.j - e.f - e.q).abs() <= 1e-12 * e.j.abs());
    }

    #[test]
    fn refuses_rho_on_spectrum() {
        let g = build_geometry(2.0 * PI, 2.0 * PI, 16, 16, (0.5, 0.0)).unwrap();
        let s = Arc::new(eigendecompose(&g));
        assert!(matches!(Coupling::new(s.clone(), 0.5), Err(Error::CouplingOnSpectrum { .. })));
        assert!(Coupling::new(s, 0.0).is_err());
    }

    #[test]
    fn overflow_guard() {
        let c = setup(0.25);
        let g = c.geometry().clone();
        let u = ScalarField::constant(g.clone(), 151.0);
        assert!(matches!(
            evaluate(&c, &u, &SpinorField::zeros(g)),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn uniformized_trivial_solution_under_rescaling() {
        let c = setup(0.25);
        let g = c.geometry().clone();
        let z = ScalarField::zeros(g.clone());
        let defect = conformal_rescale_check(&c, &z, &SpinorField::zeros(g), 0.7).unwrap();
        assert!(defect < 1e-13, "{defect}");
    }
}
