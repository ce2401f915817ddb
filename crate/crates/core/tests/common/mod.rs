#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use superliouville::*;

pub mod dense;

pub fn torus(n: usize, offset: (f64, f64)) -> Arc<TorusGeometry> {
    build_geometry(2.0 * PI, 2.0 * PI, n, n, offset).unwrap()
}

pub fn coupling(rho: f64, n: usize) -> Coupling {
    Coupling::new(Arc::new(eigendecompose(&torus(n, (0.5, 0.0)))), rho).unwrap()
}

/// Random real trigonometric polynomial with frequencies `|m_i| <= band`.
pub fn smooth_scalar(g: &Arc<TorusGeometry>, rng: &mut impl Rng, band: i64, amp: f64) -> ScalarField {
    let [l1, l2] = g.lengths();
    let terms: Vec<(f64, f64, f64, f64)> = (-band..=band)
        .flat_map(|a| (-band..=band).map(move |b| (a as f64, b as f64)))
        .map(|(a, b)| (a, b, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let scale = amp / terms.len() as f64;
    ScalarField::from_fn(g.clone(), |x, y| {
        terms
            .iter()
            .map(|&(a, b, c, p)| c * (2.0 * PI * (a * x / l1 + b * y / l2) + p).cos())
            .sum::<f64>()
            * scale
    })
    .unwrap()
}

/// Random spinor built from the lowest `modes` positive and negative
/// eigenmodes with coefficients of size `amp`.
pub fn smooth_spinor(spectrum: &DiracSpectrum, rng: &mut impl Rng, modes: i64, amp: f64, positive_only: bool) -> SpinorField {
    let g = spectrum.geometry().clone();
    let mut psi = SpinorField::zeros(g);
    for j in 1..=modes {
        for sign in [1i64, -1] {
            if positive_only && sign < 0 {
                continue;
            }
            let z = Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
            let phi = spectrum.eigenspinor(sign * j).unwrap();
            psi = psi.axpy(1.0, &phi.scale_complex(z));
        }
    }
    psi
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Worst relative error of `<grad J, direction>` against central differences
/// with step `1e-5` over `points` random points, in the `u` and `psi`
/// directions separately.
pub fn fd_gradient_errors(c: &Coupling, points: usize, rng: &mut impl Rng) -> (f64, f64) {
    const H: f64 = 1e-5;
    let j = |u: &ScalarField, psi: &SpinorField| energy::evaluate(c, u, psi).unwrap().j;
    let g = c.geometry().clone();
    let (mut worst_u, mut worst_psi) = (0.0f64, 0.0f64);
    for _ in 0..points {
        let u = smooth_scalar(&g, rng, 3, 2.0);
        let psi = smooth_spinor(c.spectrum(), rng, 8, 0.5, false);
        let (gu, gpsi) = energy::gradient(c, &u, &psi).unwrap();

        let v = smooth_scalar(&g, rng, 4, 2.0);
        let fd = (j(&u.axpy(H, &v), &psi) - j(&u.axpy(-H, &v), &psi)) / (2.0 * H);
        worst_u = worst_u.max(rel(gu.inner(&v), fd));

        let phi = smooth_spinor(c.spectrum(), rng, 10, 0.5, false);
        let fd = (j(&u, &psi.axpy(H, &phi)) - j(&u, &psi.axpy(-H, &phi))) / (2.0 * H);
        worst_psi = worst_psi.max(rel(gpsi.inner(&phi), fd));
    }
    (worst_u, worst_psi)
}
