//! Saddle refinement from the top of a deformed path or cylinder, and the
//! sampled local lower bound around the trivial solution.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chart::{recoverable, Chart, ChartPoint, Coords};
use crate::energy::{evaluate_modes, Background};
use crate::error::{Error, Result};
use crate::nehari::solve_fiber;
use crate::sampling;
use crate::spectral::{ModeCoeffs, ScalarField};

/// Finite-difference Hessian-vector product of the chart energy.
fn hessian_apply(chart: &Chart, p: &ChartPoint, v: &Coords) -> Result<Coords> {
    let nv = chart.norm(v);
    if nv == 0.0 {
        return Ok(chart.zeros());
    }
    let eps = 1e-4 / nv;
    let mut xp = p.x.clone();
    xp.axpy(eps, v);
    let mut xm = p.x.clone();
    xm.axpy(-eps, v);
    let gp = chart.eval(&xp, Some(&p.minus))?;
    let gm = chart.eval(&xm, Some(&p.minus))?;
    let mut out = gp.grad.sub(&gm.grad);
    out = out.scaled(0.5 / eps);
    Ok(out)
}

/// Approximate the `basis.len()` lowest eigenvectors of the chart Hessian at
/// `p` by block Rayleigh-Ritz on `span{V, HV}`, starting from `basis`.
pub(crate) fn refine_subspace(
    chart: &Chart,
    p: &ChartPoint,
    basis: Vec<Coords>,
    iterations: usize,
) -> Result<(Vec<Coords>, Vec<f64>)> {
    let mut v = chart.orthonormalize(basis, 1e-8);
    let want = v.len();
    let mut theta = vec![0.0; want];
    if want == 0 {
        return Ok((v, theta));
    }
    for _ in 0..iterations {
        let hv = v.iter().map(|q| hessian_apply(chart, p, q)).collect::<Result<Vec<_>>>()?;
        let hhv = hv.iter().map(|q| hessian_apply(chart, p, q)).collect::<Result<Vec<_>>>()?;
        let mut raw = v.clone();
        raw.extend(hv.iter().cloned());
        let mut hraw = hv;
        hraw.extend(hhv);
        let m = raw.len();
        let gram = DMatrix::from_fn(m, m, |i, j| chart.inner(&raw[i], &raw[j]));
        let hm = DMatrix::from_fn(m, m, |i, j| 0.5 * (chart.inner(&raw[i], &hraw[j]) + chart.inner(&raw[j], &hraw[i])));
        // whiten the Gram matrix, dropping near-dependent directions
        let ge = SymmetricEigen::new(gram);
        let gmax = ge.eigenvalues.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..m).filter(|&i| ge.eigenvalues[i] > 1e-10 * gmax).collect();
        let w = DMatrix::from_fn(m, keep.len(), |i, c| {
            ge.eigenvectors[(i, keep[c])] / ge.eigenvalues[keep[c]].sqrt()
        });
        let reduced = w.transpose() * &hm * &w;
        let re = SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..keep.len()).collect();
        order.sort_by(|&a, &b| re.eigenvalues[a].total_cmp(&re.eigenvalues[b]));
        let mut next = Vec::with_capacity(want);
        for (slot, &i) in order.iter().take(want).enumerate() {
            let y = &w * re.eigenvectors.column(i);
            let mut q = chart.zeros();
            for (j, r) in raw.iter().enumerate() {
                q.axpy(y[j], r);
            }
            theta[slot] = re.eigenvalues[i];
            next.push(q);
        }
        v = chart.orthonormalize(next, 1e-8);
        if v.len() < want {
            return Err(Error::Singular {
                what: "unstable subspace",
                detail: format!("Rayleigh-Ritz lost rank: {} of {want} directions left", v.len()),
            });
        }
    }
    Ok((v, theta))
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct ClimbStats {
    pub iterations: usize,
    pub refreshes: usize,
    pub start_residual: f64,
    pub final_residual: f64,
    /// Ritz values of the chart Hessian on the unstable subspace at the end.
    pub min_ritz: f64,
    pub max_ritz: f64,
}

/// Newton steps along the approximate unstable subspace combined with
/// gradient descent on its complement, until the Euler-Lagrange residual
/// drops below `tol`. The gradient norm is the merit function.
pub(crate) fn climb(
    chart: &Chart,
    start: ChartPoint,
    basis: Vec<Coords>,
    tol: f64,
    max_iter: usize,
) -> Result<(ChartPoint, ClimbStats)> {
    const REFRESH_EVERY: usize = 40;
    const MAX_REFRESH: usize = 40;
    const MIN_RITZ: f64 = 1e-2;
    let mut stats = ClimbStats {
        start_residual: start.residual,
        ..Default::default()
    };
    let (mut v, mut theta) = refine_subspace(chart, &start, basis, 3)?;
    let mut p = start;
    let (mut alpha, mut beta) = (0.3, 1.0);
    let mut since_refresh = 0;
    while p.residual >= tol {
        if stats.iterations >= max_iter {
            return Err(Error::NotConverged {
                solver: "saddle refinement",
                iterations: stats.iterations,
                residual: p.residual,
                detail: format!("Euler-Lagrange residual still above {tol:e}"),
            });
        }
        stats.iterations += 1;
        since_refresh += 1;
        let mut step = chart.zeros();
        let mut rest = p.grad.clone();
        for (q, &t) in v.iter().zip(&theta) {
            let c = chart.inner(q, &p.grad);
            rest.axpy(-c, q);
            let t = if t.abs() < MIN_RITZ { MIN_RITZ.copysign(t) } else { t };
            step.axpy(-beta * c / t, q);
        }
        step.axpy(-alpha, &rest);
        let mut x = p.x.clone();
        x.axpy(1.0, &step);
        let accepted = match chart.eval(&x, Some(&p.minus)) {
            Ok(t) if t.grad_norm < p.grad_norm => Some(t),
            Ok(_) => None,
            Err(e) if recoverable(&e) => None,
            Err(e) => return Err(e),
        };
        match accepted {
            Some(t) => {
                p = t;
                alpha = (alpha * 1.25).min(1.0);
                beta = (beta * 2.0).min(1.0);
            }
            None => {
                alpha *= 0.5;
                beta *= 0.5;
            }
        }
        if beta < 1e-4 || since_refresh >= REFRESH_EVERY {
            if stats.refreshes >= MAX_REFRESH {
                return Err(Error::NotConverged {
                    solver: "saddle refinement",
                    iterations: stats.iterations,
                    residual: p.residual,
                    detail: "unstable subspace kept going stale".into(),
                });
            }
            stats.refreshes += 1;
            since_refresh = 0;
            (v, theta) = refine_subspace(chart, &p, v, 2)?;
            alpha = alpha.max(0.05);
            beta = 1.0;
        }
    }
    stats.final_residual = p.residual;
    stats.min_ritz = theta.iter().copied().fold(f64::INFINITY, f64::min);
    stats.max_ritz = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((p, stats))
}

/// Sampled lower bound on the sphere of radius `r` in `N`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub radius: f64,
    /// `min J - vol` over the samples.
    pub theta: f64,
    pub samples: usize,
    /// Draws discarded because they stayed inside the cone.
    pub rejected: usize,
}

/// Cone `||u||^2 + ||phi_1||^2 + ||psi^-||^2 >= tau ||phi_2||^2` with `phi_2`
/// the component on the listed positive bins.
pub(crate) struct Cone {
    pub bins: Vec<usize>,
    pub tau: f64,
}

/// Sample `J - vol` on `{(u, psi) in N : ||u||_{H^1}^2 + ||psi||_{H^{1/2}}^2 = r^2}`
/// (outside `cone` when given). The first sample is `(0, r phi_first)`.
pub(crate) fn sample_theta(
    chart: &Chart,
    radius: f64,
    samples: usize,
    seed: u64,
    first: i64,
    cone: Option<&Cone>,
) -> Result<ThetaEstimate> {
    const MAX_LAMBDA: f64 = 4.0;
    let c = chart.coupling;
    let g = c.geometry();
    let spectrum = c.spectrum();
    let lam = spectrum.abs_lambda();
    let vol = g.volume();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut rejected = 0;

    let sobolev_sq = |u: &[f64]| {
        let m = u.iter().sum::<f64>() / u.len() as f64;
        m * m + crate::spectral::dirichlet_of(g, u)
    };

    let first_mode = spectrum.mode(first)?;
    for sample in 0..samples {
        let (uhat, mut plus) = if sample == 0 {
            let mut plus = vec![Complex64::new(0.0, 0.0); lam.len()];
            plus[first_mode.bin] = Complex64::new(1.0, 0.0);
            (vec![0.0; g.len()], plus)
        } else {
            let u = sampling::band_scalar(g, &mut rng, 4, true);
            let nu = sobolev_sq(&u).sqrt();
            (u.iter().map(|x| x / nu).collect(), sampling::band_plus(spectrum, &mut rng, MAX_LAMBDA))
        };
        let angle = if sample == 0 {
            std::f64::consts::FRAC_PI_2
        } else {
            rng.gen_range(0.0..std::f64::consts::FRAC_PI_2)
        };
        let u = ScalarField::from_raw(g.clone(), uhat.iter().map(|x| radius * angle.cos() * x).collect());
        let bg = Background::new(&u)?;
        let mut value = None;
        for _ in 0..40 {
            let mut a = ModeCoeffs::zeros(lam.len());
            a.plus.clone_from(&plus);
            let (a, _) = solve_fiber(c, &bg, &a, None)?;
            let total = spectrum.h_half_sq(&a);
            if total == 0.0 {
                break;
            }
            let s = radius * angle.sin() / total.sqrt();
            let a = a.scaled(s);
            if let Some(cone) = cone {
                let phi2: f64 = cone.bins.iter().map(|&k| (1.0 + lam[k]) * a.plus[k].norm_sqr()).sum();
                let rest = sobolev_sq(u.values()) + spectrum.h_half_sq(&a) - phi2;
                if rest < cone.tau * phi2 {
                    rejected += 1;
                    cone.bins.iter().for_each(|&k| plus[k] *= 0.5);
                    continue;
                }
            }
            value = Some(evaluate_modes(c, &u, &a, &bg, false).breakdown.j);
            break;
        }
        if let Some(j) = value {
            best = best.min(j);
        }
    }
    if !best.is_finite() {
        return Err(Error::NonFinite("local lower bound sampling"));
    }
    Ok(ThetaEstimate {
        radius,
        theta: best - vol,
        samples,
        rejected,
    })
}
