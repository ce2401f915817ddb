mod common;

use std::sync::Arc;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use superliouville::energy::{conformal_rescale_check, residual_norm};
use superliouville::minmax::*;
use superliouville::nehari::project_to_fiber;
use superliouville::*;

fn quick() -> SolveOptions {
    SolveOptions {
        theta_samples: 100,
        ..SolveOptions::default()
    }
}

#[test]
fn drivers_refuse_the_wrong_regime() {
    let below = coupling(0.25, 16);
    let between = coupling(0.809, 16);
    let refused = |c: &Coupling, regime| {
        matches!(
            solve(c, &SolveOptions { regime, ..quick() }),
            Err(Error::Regime { .. })
        )
    };
    assert!(refused(&below, Regime::Linking));
    assert!(refused(&between, Regime::MountainPass));
    assert!(matches!(MountainPassConfig::for_coupling(&between), Err(Error::Regime { .. })));
    assert!(matches!(select_linking_constants(&below, 1, 1.0), Err(Error::Regime { .. })));
    assert!(matches!(select_linking_constants(&between, 2, 1.0), Err(Error::Regime { .. })));
    assert_eq!(level_index(&below), 0);
    assert_eq!(level_index(&between), 1);

    let g = torus(16, (0.5, 0.0));
    let on = Coupling::new(Arc::new(eigendecompose(&g)), 0.5);
    assert!(matches!(on, Err(Error::CouplingOnSpectrum { .. })));
    let periodic = Coupling::new(Arc::new(eigendecompose(&torus(16, (0.0, 0.0)))), 0.25);
    assert!(matches!(
        periodic.and_then(|c| solve(&c, &quick())),
        Err(Error::KernelPresent { kernel_dim: 2 })
    ));
}

#[test]
fn mountain_pass_deformation_lowers_the_path() {
    let c = coupling(0.25, 16);
    let sol = solve(&c, &quick()).unwrap().solution;
    let vol = c.geometry().volume();
    assert!(sol.max_history.windows(2).all(|w| w[1] <= w[0]), "{:?}", sol.max_history);
    assert!(sol.level > vol + sol.theta.theta && sol.theta.theta > 0.0);
    assert!(sol.residual < 1e-8);
    assert!(sol.point.psi().norm_l2() > 1e-3);
}

#[test]
fn newton_recovers_a_perturbed_solution() {
    let c = coupling(0.25, 16);
    let sol = solve(&c, &quick()).unwrap().solution;
    let g = c.geometry().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v = smooth_scalar(&g, &mut rng, 3, 1.0);
    let (plus, _) = c.spectrum().project_pm(sol.point.psi()).unwrap();
    let perturbed = |eps: f64| project_to_fiber(&c, &sol.point.u().axpy(eps, &v), &plus).unwrap();
    let probe = residual_norm(&c, perturbed(1e-6).u(), perturbed(1e-6).psi()).unwrap();
    let start = perturbed(1e-6 * 1e-8 / probe);
    let r0 = residual_norm(&c, start.u(), start.psi()).unwrap();
    assert!(r0 > 5e-9 && r0 < 2e-8, "{r0:e}");
    let (polished, log) = newton_polish_logged(&c, &start).unwrap();
    assert!(log.residuals.len() - 1 <= 5, "{:?}", log.residuals);
    assert!(residual_norm(&c, polished.u(), polished.psi()).unwrap() < 1e-11);
}

#[test]
fn uniformize_back_substitution() {
    let g = torus(32, (0.5, 0.0));
    let k = ScalarField::from_fn(g.clone(), |x, y| -1.0 + 0.1 * x.cos() * (2.0 * y).sin()).unwrap();
    let u = uniformize(&g, &k).unwrap();
    let lap = laplacian_apply(&g, &u).unwrap();
    let exp2: Vec<f64> = u.values().iter().map(|x| (2.0 * x).exp()).collect();
    let worst = (0..g.len())
        .map(|i| (lap.values()[i] - exp2[i] - k.values()[i]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst:e}");

    let zero = uniformize(&g, &ScalarField::constant(g.clone(), -1.0)).unwrap();
    assert!(zero.values().iter().all(|x| x.abs() < 1e-12));
    assert!(uniformize(&g, &ScalarField::constant(g.clone(), 0.5)).is_err());
}

#[test]
fn linking_constants_track_the_gap() {
    let g = torus(16, (0.5, 0.0));
    let spectrum = Arc::new(eigendecompose(&g));
    let vol = g.volume();
    let mut last_t = f64::INFINITY;
    for rho in [0.55, 0.7, 0.809, 0.95, 1.1] {
        let c = Coupling::new(spectrum.clone(), rho).unwrap();
        let cfg = select_linking_constants(&c, 1, vol).unwrap();
        assert!(cfg.t_max < last_t);
        last_t = cfg.t_max;
        assert!(verify_bullets(&c, &cfg).unwrap().holds(), "rho {rho}");
        assert!(rho * cfg.t_max.exp() - cfg.lambda_next >= 1.0);
    }
}

#[test]
fn conformal_rescaling_carries_solutions() {
    let c = coupling(0.25, 16);
    let sol = solve(&c, &quick()).unwrap().solution;
    let (u, psi) = (sol.point.u(), sol.point.psi());
    let base = residual_norm(&c, u, psi).unwrap();
    assert_eq!(conformal_rescale_check(&c, u, psi, 0.0).unwrap(), base);
    for v in [-0.5, 0.3, 1.0] {
        let defect = conformal_rescale_check(&c, u, psi, v).unwrap();
        assert!(defect <= 10.0 * base, "v {v}: {defect:e} vs {base:e}");
    }
}
