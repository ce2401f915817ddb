//! Steepest descent on `N` in chart coordinates with Armijo backtracking.

use super::chart::{recoverable, Chart, ChartPoint, Coords};
use crate::energy::Coupling;
use crate::error::{Error, Result};
use crate::nehari::NehariPoint;

pub(crate) const ARMIJO_C: f64 = 1e-4;
pub(crate) const MIN_STEP: f64 = 1e-14;
const ROUNDOFF_STALL: f64 = 1e3 * f64::EPSILON;

/// Outcome of one Armijo line search along `dir` from `p`.
pub(crate) enum LineSearch {
    Accepted(ChartPoint, f64),
    /// Step fell below [`MIN_STEP`].
    Failed,
}

/// Backtrack from `alpha` until `J(x + a d) <= J(x) - c a ||d||^2`, where `d` is a
/// descent direction with `<grad, d> = -||d||^2`.
pub(crate) fn armijo(chart: &Chart, p: &ChartPoint, dir: &Coords, dir_sq: f64, mut alpha: f64) -> Result<LineSearch> {
    while alpha >= MIN_STEP {
        let mut x = p.x.clone();
        x.axpy(alpha, dir);
        match chart.eval(&x, Some(&p.minus)) {
            Ok(t) if t.j() <= p.j() - ARMIJO_C * alpha * dir_sq => return Ok(LineSearch::Accepted(t, alpha)),
            Ok(_) => {}
            Err(e) if recoverable(&e) => {}
            Err(e) => return Err(e),
        }
        alpha *= 0.5;
    }
    Ok(LineSearch::Failed)
}

/// One Armijo step along the negative gradient with the span of `tangents`
/// removed. Returns the accepted point and step, or `None` if the projected
/// gradient vanishes or the line search fails.
pub(crate) fn perpendicular_step(
    chart: &Chart,
    p: &ChartPoint,
    tangents: Vec<Coords>,
    alpha: f64,
) -> Result<Option<(ChartPoint, f64)>> {
    let basis = chart.orthonormalize(tangents, 1e-10);
    let dir = chart.project_out(&p.grad, &basis).scaled(-1.0);
    let dir_sq = chart.inner(&dir, &dir);
    if !(dir_sq > 0.0) {
        return Ok(None);
    }
    Ok(match armijo(chart, p, &dir, dir_sq, alpha)? {
        LineSearch::Accepted(t, a) => Some((t, a)),
        LineSearch::Failed => None,
    })
}

/// Result of [`descend`].
#[derive(Clone, Debug)]
pub struct Descent {
    pub point: NehariPoint,
    /// `J` after each accepted step, starting with the initial value.
    pub energies: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn descend_chart(
    chart: &Chart,
    mut p: ChartPoint,
    max_iter: usize,
    tol: f64,
    energies: &mut Vec<f64>,
) -> Result<(ChartPoint, usize)> {
    let mut alpha = 1.0;
    energies.push(p.j());
    for it in 0..max_iter {
        if p.grad_norm < tol {
            return Ok((p, it));
        }
        let dir = p.grad.scaled(-1.0);
        let dir_sq = p.grad_norm * p.grad_norm;
        match armijo(chart, &p, &dir, dir_sq, alpha)? {
            LineSearch::Accepted(t, a) => {
                p = t;
                alpha = (2.0 * a).min(4.0);
                energies.push(p.j());
            }
            // the predicted decrease is below the rounding error of J
            LineSearch::Failed if p.grad_norm * p.grad_norm <= ROUNDOFF_STALL * p.j().abs().max(1.0) => {
                return Ok((p, it))
            }
            LineSearch::Failed => {
                return Err(Error::NotConverged {
                    solver: "constrained descent",
                    iterations: it,
                    residual: p.grad_norm,
                    detail: format!("line search step fell below {MIN_STEP:e}"),
                })
            }
        }
    }
    Ok((p, max_iter))
}

/// Steepest descent of `J` restricted to `N`, moving `(u, psi^+)` along the
/// negative chart gradient and completing `psi^-` on the fiber at every step.
/// Stops when the gradient norm drops below `tol`, after `max_iter` steps, or
/// when the line search stalls because the expected decrease is lost in the
/// rounding of `J`; accepted energies are non-increasing.
pub fn descend(coupling: &Coupling, start: &NehariPoint, max_iter: usize, tol: f64) -> Result<Descent> {
    start.require_certified()?;
    coupling.check(start.u(), start.psi())?;
    let chart = Chart::new(coupling, false);
    let (x, minus) = chart.coords_of(start);
    let p = chart.eval(&x, Some(&minus))?;
    let mut energies = Vec::new();
    let (p, iterations) = descend_chart(&chart, p, max_iter, tol, &mut energies)?;
    Ok(Descent {
        point: chart.to_point(&p)?,
        gradient_norm: p.grad_norm,
        converged: p.grad_norm < tol,
        energies,
        iterations,
    })
}
