//! Spectral operators at N = 8 against dense matrices assembled from explicit
//! Fourier sums and the Clifford matrices, diagonalized with nalgebra.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::dense::*;
use num_complex::Complex64;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superliouville::*;

#[test]
fn clifford_relation() {
    let cl = clifford();
    for i in 0..2 {
        for j in 0..2 {
            let anti = &cl[i] * &cl[j] + &cl[j] * &cl[i];
            let expect = CMat::identity(2, 2) * c(if i == j { -2.0 } else { 0.0 }, 0.0);
            assert!((anti - expect).norm() < 1e-15);
        }
    }
}

#[test]
fn dirac_apply_matches_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for offset in OFFSETS {
        let g = geometry((2.0 * PI, 3.0), offset);
        let d = dense_dirac(&g);
        assert!((&d - d.adjoint()).norm() < 1e-12 * d.norm(), "dense Dirac not Hermitian");
        for _ in 0..5 {
            let psi = random_spinor(&g, &mut rng);
            let ours = dirac_apply(&g, &psi).unwrap();
            let dense = &d * cvec(&psi);
            let err = rel_err(ours.values(), dense.as_slice());
            assert!(err < TOL, "offset {offset:?}: {err:e}");
        }
    }
}

#[test]
fn laplacian_apply_matches_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = geometry((2.0 * PI, 5.0), (0.5, 0.0));
    let lap = dense_laplacian(&g);
    for _ in 0..5 {
        let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = ScalarField::new(g.clone(), v.clone()).unwrap();
        let ours = laplacian_apply(&g, &u).unwrap();
        let dense = &lap * DVector::from_vec(v);
        let scale = dense.amax();
        let err = ours.values().iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < TOL * scale, "{err:e}");
    }
}


#[test]
fn eigenvalues_and_kernels_match_dense_diagonalization() {
    for offset in OFFSETS {
        let g = geometry((2.0 * PI, 2.0 * PI), offset);
        let spectrum = eigendecompose(&g);
        let (mut dense, _) = dense_spectrum(&g);
        dense.sort_by(f64::total_cmp);
        let mut ours: Vec<f64> = spectrum.modes().iter().map(|m| m.lambda).collect();
        ours.extend(std::iter::repeat(0.0).take(spectrum.kernel_dim()));
        ours.sort_by(f64::total_cmp);
        assert_eq!(ours.len(), dense.len());
        for (a, b) in ours.iter().zip(&dense) {
            assert!((a - b).abs() < TOL * (1.0 + b.abs()), "offset {offset:?}: {a} vs {b}");
        }
        let dense_kernel = dense.iter().filter(|l| l.abs() < 1e-9).count();
        let expect = if offset == (0.0, 0.0) { 2 } else { 0 };
        assert_eq!(dense_kernel, expect, "offset {offset:?}");
        assert_eq!(spectrum.kernel_dim(), expect);
        assert_eq!(g.kernel_dim(), expect);
    }
}

#[test]
fn spectrum_is_exactly_symmetric() {
    for offset in OFFSETS {
        let g = geometry((2.0 * PI, 1.7), offset);
        let spectrum = eigendecompose(&g);
        let mut pos: Vec<u64> = spectrum.modes().iter().filter(|m| m.lambda > 0.0).map(|m| m.lambda.to_bits()).collect();
        let mut neg: Vec<u64> =
            spectrum.modes().iter().filter(|m| m.lambda < 0.0).map(|m| (-m.lambda).to_bits()).collect();
        pos.sort();
        neg.sort();
        assert_eq!(pos, neg);
        for m in spectrum.modes() {
            assert_eq!(spectrum.eigenvalue(-m.index).unwrap(), -m.lambda);
        }
    }
}

#[test]
fn eigenspinors_satisfy_the_eigen_relation() {
    let g = geometry((2.0 * PI, 2.0 * PI), (0.5, 0.5));
    let spectrum = eigendecompose(&g);
    let d = dense_dirac(&g);
    for m in spectrum.modes() {
        let phi = spectrum.eigenspinor(m.index).unwrap();
        let dphi = &d * cvec(&phi);
        let expect: Vec<Complex64> = phi.values().iter().map(|z| z * m.lambda).collect();
        assert!(rel_err(dphi.as_slice(), &expect) < 1e-12, "mode {}", m.index);
    }
}


#[test]
fn projections_and_fractional_powers_match_dense_functional_calculus() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for offset in [(0.5, 0.0), (0.0, 0.5), (0.5, 0.5)] {
        let g = geometry((2.0 * PI, 4.0), offset);
        let spectrum = eigendecompose(&g);
        let p_plus = dense_function(&g, |l| if l > 0.0 { 1.0 } else { 0.0 });
        let half = dense_function(&g, |l| l.abs().sqrt());
        let inv_half = dense_function(&g, |l| 1.0 / l.abs().sqrt());
        for _ in 0..3 {
            let psi = random_spinor(&g, &mut rng);
            let x = cvec(&psi);
            let (plus, minus) = spectrum.project_pm(&psi).unwrap();
            let dense_plus = &p_plus * &x;
            assert!(rel_err(plus.values(), dense_plus.as_slice()) < TOL);
            let dense_minus = &x - &dense_plus;
            assert!(rel_err(minus.values(), dense_minus.as_slice()) < TOL);
            let ours = spectrum.frac_power_apply(0.5, &psi).unwrap();
            assert!(rel_err(ours.values(), (&half * &x).as_slice()) < TOL);
            let ours = spectrum.frac_power_apply(-0.5, &psi).unwrap();
            assert!(rel_err(ours.values(), (&inv_half * &x).as_slice()) < TOL);
        }
    }
}

#[test]
fn periodic_structure_refuses_projection() {
    let g = geometry((2.0 * PI, 2.0 * PI), (0.0, 0.0));
    let spectrum = eigendecompose(&g);
    let psi = SpinorField::zeros(g.clone());
    assert!(spectrum.project_pm(&psi).is_err());
    let c = Coupling::new(Arc::new(spectrum), 0.25);
    assert!(c.is_err() || superliouville::minmax::MountainPassConfig::for_coupling(&c.unwrap()).is_err());
}
