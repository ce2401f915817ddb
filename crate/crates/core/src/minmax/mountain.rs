//! Mountain pass for `0 < rho < lambda_1`: deform the straight path from the
//! trivial solution `(0, 0)` to a low endpoint `(ubar_1, s phi_1)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::chart::{Chart, ChartPoint, Coords};
use super::descent::perpendicular_step;
use super::newton::polish_modes;
use super::saddle::{climb, sample_theta};
use super::{level_index, regime_error, MinMaxSolution, TraceRecord};
use crate::energy::{evaluate, Coupling};
use crate::error::{Error, Result};

/// Sweeps between arc-length reparametrizations.
const RESPLINE_EVERY: usize = 5;
/// Sweep window and relative drop below which the max level has stagnated.
const STAGNATION_WINDOW: usize = 10;
const STAGNATION_DROP: f64 = 1e-9;
/// Residual at which saddle refinement hands over to Newton.
pub(crate) const CLIMB_TOL: f64 = 1e-4;
pub(crate) const CLIMB_CAP: usize = 3000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MountainPassConfig {
    /// Number of path nodes including both endpoints.
    pub path_nodes: usize,
    /// `(ubar_1, s)`: the endpoint is the constant `ubar_1` with `s phi_1`.
    pub endpoint: (f64, f64),
    /// Cap on deformation sweeps.
    pub deform_steps: usize,
    /// Initial Armijo step.
    pub step_size: f64,
    /// Required Euler-Lagrange residual of the returned solution.
    pub tol: f64,
    pub theta_radius: f64,
    pub theta_samples: usize,
    pub seed: u64,
    pub trace_energy: bool,
}

impl MountainPassConfig {
    /// Defaults for `coupling`: `ubar_1 = log((lambda_1 + 2)/rho)` and `s`
    /// doubled from 1 until the endpoint energy is negative.
    pub fn for_coupling(coupling: &Coupling) -> Result<Self> {
        require_regime(coupling)?;
        let lambda_1 = coupling.spectrum().lambda_1();
        let ubar = ((lambda_1 + 2.0) / coupling.rho()).ln();
        let mut s = 1.0f64;
        while endpoint_energy(coupling, ubar, s)? >= 0.0 {
            s *= 2.0;
            if s > 1e12 {
                return Err(Error::Infeasible(format!("no mountain-pass endpoint with J < 0 up to s = {s:e}")));
            }
        }
        Ok(MountainPassConfig {
            path_nodes: 17,
            endpoint: (ubar, s),
            deform_steps: 300,
            step_size: 1.0,
            tol: 1e-8,
            theta_radius: 0.05,
            theta_samples: 2000,
            seed: 7,
            trace_energy: false,
        })
    }

    /// Check the invariants; returns the endpoint energy.
    pub fn validate(&self, coupling: &Coupling) -> Result<f64> {
        require_regime(coupling)?;
        if self.path_nodes < 16 {
            return Err(Error::InvalidArgument(format!("path_nodes must be >= 16, got {}", self.path_nodes)));
        }
        if !(self.step_size > 0.0 && self.tol > 0.0 && self.theta_radius > 0.0) {
            return Err(Error::InvalidArgument("step_size, tol and theta_radius must be positive".into()));
        }
        let (ubar, s) = self.endpoint;
        let lambda_1 = coupling.spectrum().lambda_1();
        if !(coupling.rho() * ubar.exp() > lambda_1 + 1.0) {
            return Err(Error::Infeasible(format!(
                "endpoint depth: rho e^ubar = {:.6} must exceed lambda_1 + 1 = {:.6}",
                coupling.rho() * ubar.exp(),
                lambda_1 + 1.0
            )));
        }
        let e = endpoint_energy(coupling, ubar, s)?;
        let vol = coupling.geometry().volume();
        if !(e < vol) {
            return Err(Error::Infeasible(format!("endpoint energy {e} is not below J(0,0) = {vol}")));
        }
        Ok(e)
    }
}

fn require_regime(coupling: &Coupling) -> Result<()> {
    if level_index(coupling) != 0 {
        return Err(regime_error(coupling, "mountain pass", "rho must lie below the first eigenvalue"));
    }
    coupling.spectrum().require_kernel_free()
}

fn endpoint_energy(coupling: &Coupling, ubar: f64, s: f64) -> Result<f64> {
    let g = coupling.geometry().clone();
    let u = crate::ScalarField::constant(g, ubar);
    let psi = coupling.spectrum().eigenspinor(1)?.scale(s);
    Ok(evaluate(coupling, &u, &psi)?.j)
}

fn argmax(nodes: &[ChartPoint]) -> (usize, f64) {
    nodes
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, p)| if p.j() > bv { (i, p.j()) } else { (bi, bv) })
}

/// Redistribute interior nodes at equal metric arc length.
fn respline(chart: &Chart, nodes: &[ChartPoint]) -> Result<Vec<ChartPoint>> {
    let n = nodes.len();
    let mut s = vec![0.0; n];
    for i in 1..n {
        s[i] = s[i - 1] + chart.norm(&nodes[i].x.sub(&nodes[i - 1].x));
    }
    let total = s[n - 1];
    let mut out = Vec::with_capacity(n);
    out.push(nodes[0].clone());
    let mut seg = 0;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while seg + 2 < n && s[seg + 1] < target {
            seg += 1;
        }
        let len = s[seg + 1] - s[seg];
        let t = if len > 0.0 { ((target - s[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let x = Coords::lerp(&nodes[seg].x, &nodes[seg + 1].x, t);
        let warm = if t < 0.5 { &nodes[seg].minus } else { &nodes[seg + 1].minus };
        out.push(chart.eval(&x, Some(warm))?);
    }
    out.push(nodes[n - 1].clone());
    Ok(out)
}

/// Mountain-pass critical point of `J` on `N`.
///
/// The straight path in `(u, psi^+)` from `(0, 0)` to the endpoint is deformed
/// by Armijo steps of each interior node along the gradient component normal
/// to the path; the path is reparametrized by arc length whenever that does
/// not raise its maximum. When the maximum stagnates, the top node is refined
/// to the saddle along the path's unstable direction and polished by Newton.
pub fn mountain_pass(coupling: &Coupling, config: &MountainPassConfig) -> Result<MinMaxSolution> {
    config.validate(coupling)?;
    let vol = coupling.geometry().volume();
    let chart = Chart::new(coupling, config.trace_energy);
    let n = config.path_nodes;
    let (ubar, s) = config.endpoint;
    let end = chart.constant_mode(ubar, 1, Complex64::new(s, 0.0))?;
    let start = chart.zeros();

    chart.set_phase("init", 0);
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let x = Coords::lerp(&start, &end, i as f64 / (n - 1) as f64);
        nodes.push(chart.eval(&x, None)?);
    }
    let mut alpha = vec![config.step_size; n];
    let (mut top, mut max) = argmax(&nodes);
    let mut history = vec![max];

    for sweep in 1..=config.deform_steps {
        chart.set_phase("deform", sweep);
        let mut next = nodes.clone();
        for i in 1..n - 1 {
            let tangent = nodes[i + 1].x.sub(&nodes[i - 1].x);
            if let Some((p, a)) = perpendicular_step(&chart, &nodes[i], vec![tangent], alpha[i])? {
                next[i] = p;
                alpha[i] = (2.0 * a).min(4.0 * config.step_size);
            } else {
                alpha[i] = (0.5 * alpha[i]).max(1e-8);
            }
        }
        nodes = next;
        if sweep % RESPLINE_EVERY == 0 {
            let candidate = respline(&chart, &nodes)?;
            if argmax(&candidate).1 <= argmax(&nodes).1 {
                nodes = candidate;
            }
        }
        (top, max) = argmax(&nodes);
        history.push(max);
        chart.set_phase("sweep", sweep);
        chart.record(Some(top), &nodes[top]);
        if max <= vol * (1.0 + 1e-10) {
            return Err(Error::PathCollapse { level: max, trivial: vol });
        }
        if sweep > STAGNATION_WINDOW
            && history[sweep - STAGNATION_WINDOW] - max <= STAGNATION_DROP * max.abs()
        {
            break;
        }
    }

    if top == 0 || top == n - 1 {
        return Err(Error::PathCollapse { level: max, trivial: vol });
    }
    let basis = vec![nodes[top + 1].x.sub(&nodes[top - 1].x)];
    finish(&chart, nodes[top].clone(), basis, history, config.tol, |chart| {
        sample_theta(chart, config.theta_radius, config.theta_samples, config.seed, 1, None)
    })
}

/// Shared tail of both drivers: saddle refinement from `top`, Newton polish,
/// the nontriviality checks and the sampled lower bound.
pub(crate) fn finish(
    chart: &Chart,
    top: ChartPoint,
    basis: Vec<Coords>,
    max_history: Vec<f64>,
    tol: f64,
    theta: impl FnOnce(&Chart) -> Result<super::ThetaEstimate>,
) -> Result<MinMaxSolution> {
    let coupling = chart.coupling;
    let vol = coupling.geometry().volume();
    chart.set_phase("climb", 0);
    let (p, climb_stats) = climb(chart, top, basis, CLIMB_TOL, CLIMB_CAP)?;
    chart.set_phase("newton", 0);
    let (point, newton) = polish_modes(coupling, p.x.u.clone(), p.modes())?;
    let (ru, rp) = crate::energy::el_residual(coupling, point.u(), point.psi())?;
    let residual = ru.norm_l2() + rp.norm_l2();
    if !(residual < tol) {
        return Err(Error::NotConverged {
            solver: "min-max",
            iterations: newton.residuals.len(),
            residual,
            detail: format!("Newton output misses the requested tolerance {tol:e}"),
        });
    }
    let energy = evaluate(coupling, point.u(), point.psi())?;
    if !(energy.j > vol) || point.psi().norm_l2() <= 1e-3 {
        return Err(Error::PathCollapse { level: energy.j, trivial: vol });
    }
    chart.set_phase("theta", 0);
    let theta = theta(chart)?;
    let evaluations = chart.evaluations();
    let mut trace = chart.take_records();
    trace.push(TraceRecord {
        phase: "solution",
        step: 0,
        node: None,
        energy,
        residual: Some(residual),
        grad_norm: None,
    });
    Ok(MinMaxSolution {
        point,
        level: energy.j,
        energy,
        residual,
        theta,
        max_history,
        boundary: None,
        climb: climb_stats,
        newton,
        evaluations,
        trace,
    })
}
