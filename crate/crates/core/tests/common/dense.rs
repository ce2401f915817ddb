//! Dense N = 8 assemblies of the spectral operators from explicit Fourier
//! sums and the Clifford matrices.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use superliouville::*;

pub const N: usize = 8;
pub const TOL: f64 = 1e-10;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn geometry(l: (f64, f64), offset: (f64, f64)) -> Arc<TorusGeometry> {
    build_geometry(l.0, l.1, N, N, offset).unwrap()
}

/// Frequencies `2 pi (m + delta) / L` for `m` in `[-N/2, N/2)`.
pub fn wavevectors(g: &TorusGeometry, [d1, d2]: [f64; 2]) -> Vec<[f64; 2]> {
    let [l1, l2] = g.lengths();
    let half = N as i64 / 2;
    let mut out = Vec::new();
    for m1 in -half..half {
        for m2 in -half..half {
            out.push([2.0 * PI * (m1 as f64 + d1) / l1, 2.0 * PI * (m2 as f64 + d2) / l2]);
        }
    }
    out
}

/// Dense spectral derivative along `dir` for functions with boundary phase
/// `deltas`.
pub fn derivative(g: &TorusGeometry, dir: usize, deltas: [f64; 2]) -> CMat {
    let n = g.len();
    let xi = wavevectors(g, deltas);
    CMat::from_fn(n, n, |i, k| {
        let (xa, xb) = (g.grid_point(i), g.grid_point(k));
        let s: Complex64 = xi
            .iter()
            .map(|w| {
                let phase = w[0] * (xa[0] - xb[0]) + w[1] * (xa[1] - xb[1]);
                c(0.0, w[dir]) * Complex64::from_polar(1.0, phase)
            })
            .sum();
        s / n as f64
    })
}

pub fn pauli() -> [CMat; 2] {
    [
        CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
    ]
}

/// Clifford multiplication `c(e_j) = i sigma_j`.
pub fn clifford() -> [CMat; 2] {
    pauli().map(|s| s * c(0.0, 1.0))
}

/// `D = c(e_1) d_1 + c(e_2) d_2` acting on `[psi_1; psi_2]`.
pub fn dense_dirac(g: &TorusGeometry) -> CMat {
    let n = g.len();
    let cl = clifford();
    let mut d = CMat::zeros(2 * n, 2 * n);
    for dir in 0..2 {
        let der = derivative(g, dir, g.deltas());
        for a in 0..2 {
            for b in 0..2 {
                let coef = cl[dir][(a, b)];
                if coef != c(0.0, 0.0) {
                    let mut block = d.view_mut((a * n, b * n), (n, n));
                    block += &der * coef;
                }
            }
        }
    }
    d
}

pub fn dense_laplacian(g: &TorusGeometry) -> DMatrix<f64> {
    let d = [derivative(g, 0, [0.0; 2]), derivative(g, 1, [0.0; 2])];
    let lap = &d[0] * &d[0] + &d[1] * &d[1];
    assert!(lap.iter().all(|z| z.im.abs() < 1e-12));
    lap.map(|z| z.re)
}

pub fn random_spinor(g: &Arc<TorusGeometry>, rng: &mut impl Rng) -> SpinorField {
    let v = (0..2 * g.len()).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    SpinorField::new(g.clone(), v).unwrap()
}

pub fn cvec(psi: &SpinorField) -> DVector<Complex64> {
    DVector::from_column_slice(psi.values())
}

pub fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

pub const OFFSETS: [(f64, f64); 4] = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];

pub fn dense_spectrum(g: &TorusGeometry) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(dense_dirac(g));
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `V f(Lambda) V^*` for the dense Dirac matrix.
pub fn dense_function(g: &TorusGeometry, f: impl Fn(f64) -> f64) -> CMat {
    let (lam, v) = dense_spectrum(g);
    let diag = CMat::from_diagonal(&DVector::from_iterator(lam.len(), lam.iter().map(|&l| c(f(l), 0.0))));
    &v * diag * v.adjoint()
}

/// Worst relative deviation from the dense assembly over the four offsets:
/// Dirac and Laplacian application, the sorted spectrum, the spectral
/// projections and `|D|^{+-1/2}`.
pub fn worst_oracle_error(rng: &mut impl Rng) -> f64 {
    let mut worst = 0.0f64;
    for offset in OFFSETS {
        let g = geometry((2.0 * PI, 3.0), offset);
        let spectrum = eigendecompose(&g);
        let d = dense_dirac(&g);
        let lap = dense_laplacian(&g);
        let (mut dense, _) = dense_spectrum(&g);
        dense.sort_by(f64::total_cmp);
        let mut ours: Vec<f64> = spectrum.modes().iter().map(|m| m.lambda).collect();
        ours.extend(std::iter::repeat(0.0).take(spectrum.kernel_dim()));
        ours.sort_by(f64::total_cmp);
        if ours.len() != dense.len() {
            return f64::INFINITY;
        }
        for (a, b) in ours.iter().zip(&dense) {
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
        for _ in 0..3 {
            let psi = random_spinor(&g, rng);
            let x = cvec(&psi);
            worst = worst.max(rel_err(dirac_apply(&g, &psi).unwrap().values(), (&d * &x).as_slice()));
            let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = ScalarField::new(g.clone(), v.clone()).unwrap();
            let ours = laplacian_apply(&g, &u).unwrap();
            let dense = &lap * DVector::from_vec(v);
            let err = ours.values().iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(err / dense.amax());
            if spectrum.kernel_dim() > 0 {
                continue;
            }
            let p_plus = dense_function(&g, |l| if l > 0.0 { 1.0 } else { 0.0 });
            let (plus, _) = spectrum.project_pm(&psi).unwrap();
            worst = worst.max(rel_err(plus.values(), (&p_plus * &x).as_slice()));
            for (s, f) in [(0.5, 0.5f64), (-0.5, -0.5)] {
                let dense = dense_function(&g, |l| l.abs().powf(f));
                let ours = spectrum.frac_power_apply(s, &psi).unwrap();
                worst = worst.max(rel_err(ours.values(), (&dense * &x).as_slice()));
            }
        }
    }
    worst
}
