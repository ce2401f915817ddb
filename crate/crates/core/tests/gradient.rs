mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use superliouville::energy::{el_residual, evaluate};
use superliouville::*;

#[test]
fn gradient_matches_central_differences_below_first_eigenvalue() {
    let (eu, ep) = fd_gradient_errors(&coupling(0.25, 16), 50, &mut ChaCha8Rng::seed_from_u64(1));
    assert!(eu < 1e-5 && ep < 1e-5, "u {eu:e}, psi {ep:e}");
}

#[test]
fn gradient_matches_central_differences_between_levels() {
    let (eu, ep) = fd_gradient_errors(&coupling(0.809, 16), 50, &mut ChaCha8Rng::seed_from_u64(2));
    assert!(eu < 1e-5 && ep < 1e-5, "u {eu:e}, psi {ep:e}");
}

#[test]
fn trivial_point_is_critical() {
    let c = coupling(0.809, 16);
    let g = c.geometry().clone();
    let (u, psi) = (ScalarField::zeros(g.clone()), SpinorField::zeros(g.clone()));
    let (ru, rp) = el_residual(&c, &u, &psi).unwrap();
    assert_eq!(ru.norm_l2(), 0.0);
    assert_eq!(rp.norm_l2(), 0.0);
    assert!(rel(evaluate(&c, &u, &psi).unwrap().j, g.volume()) < 1e-15);
}
