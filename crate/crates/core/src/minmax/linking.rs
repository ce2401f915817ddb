//! Linking for `lambda_k < rho < lambda_{k+1}`: deform the cylinder
//! `D = {(t, phi + A t phi_{k+1}) : t in [0, T], phi in N_k, ||phi|| <= R}`
//! with its boundary pinned, where `N_k` spans the modes of the first `k`
//! eigenvalue levels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::chart::{Chart, ChartPoint, Coords};
use super::descent::perpendicular_step;
use super::mountain::finish;
use super::saddle::{sample_theta, Cone};
use super::{level_index, regime_error, MinMaxSolution};
use crate::energy::{Coupling, OVERFLOW_GUARD};
use crate::error::{Error, Result};
use crate::nehari::domination_constant;

const R_SAMPLES: usize = 256;
const A_MARGIN: f64 = 1.1;
const R_MARGIN: f64 = 1.2;
const STAGNATION_WINDOW: usize = 10;
const STAGNATION_DROP: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkingConfig {
    /// Number of eigenvalue levels below `rho`.
    pub k: usize,
    pub lambda_k: f64,
    pub lambda_next: f64,
    #[serde(rename = "T")]
    pub t_max: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "R")]
    pub r: f64,
    /// `(n_t, n_ball)`: t-levels and radial rings per ball direction.
    pub cylinder_grid: (usize, usize),
    /// Cone parameter `4 (1 + C^2 rho^2)`.
    pub tau: f64,
    /// Measured domination constant `C`.
    pub domination: f64,
    pub deform_steps: usize,
    pub step_size: f64,
    pub tol: f64,
    pub theta_radius: f64,
    pub theta_samples: usize,
    pub seed: u64,
    pub trace_energy: bool,
}

/// The three inequalities the constants must satisfy, re-evaluated.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BulletCheck {
    /// `rho e^T - lambda_{k+1}`, must be `>= 1`.
    pub depth: f64,
    /// `vol (e^{2T} - 2T) - 2 A^2 T^2 (rho e^T - lambda_{k+1})`, must be `< vol`.
    pub top: f64,
    /// Max of `J` over the lateral boundary samples, must be `< vol`.
    pub lateral: f64,
    pub vol: f64,
}

impl BulletCheck {
    pub fn holds(&self) -> bool {
        self.depth >= 1.0 && self.top < self.vol && self.lateral < self.vol
    }
}

/// Unit `H^{1/2}` directions spanning `N_k` (two real directions per mode).
fn ball_directions(chart: &Chart, k: usize) -> Result<Vec<Coords>> {
    let spectrum = chart.coupling.spectrum();
    let mut out = Vec::new();
    for level in 0..k {
        for j in spectrum.level_modes(level) {
            let m = spectrum.mode(j)?;
            let w = 1.0 / (1.0 + m.lambda).sqrt();
            for phase in [Complex64::new(w, 0.0), Complex64::new(0.0, w)] {
                let mut x = chart.zeros();
                x.plus[m.bin] = phase;
                out.push(x);
            }
        }
    }
    Ok(out)
}

fn first_mode_above(coupling: &Coupling, k: usize) -> i64 {
    coupling.spectrum().level_modes(k)[0]
}

/// Coordinates of `(t, phi + A t phi_{k+1})`.
fn cylinder_point(chart: &Chart, cfg: &LinkingConfig, t: f64, phi: &Coords) -> Result<Coords> {
    let next = first_mode_above(chart.coupling, cfg.k);
    let mut x = chart.constant_mode(t, next, Complex64::new(cfg.a * t, 0.0))?;
    x.axpy(1.0, phi);
    Ok(x)
}

fn check_regime(coupling: &Coupling, k: usize) -> Result<(f64, f64)> {
    coupling.spectrum().require_kernel_free()?;
    let levels = coupling.spectrum().levels();
    if k == 0 || k >= levels.len() || level_index(coupling) != k {
        return Err(regime_error(
            coupling,
            "linking",
            &format!("need lambda_k < rho < lambda_(k+1) for k = {k}"),
        ));
    }
    Ok((levels[k - 1], levels[k]))
}

fn lateral_max(chart: &Chart, cfg: &LinkingConfig, dirs: &[Coords], samples: usize) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for i in 0..samples {
        let t = cfg.t_max * i as f64 / (samples - 1) as f64;
        for d in dirs {
            for sign in [1.0, -1.0] {
                let x = cylinder_point(chart, cfg, t, &d.scaled(sign * cfg.r))?;
                max = max.max(chart.eval(&x, None)?.j());
            }
        }
    }
    Ok(max)
}

/// Re-evaluate the three constant inequalities for `cfg`.
pub fn verify_bullets(coupling: &Coupling, cfg: &LinkingConfig) -> Result<BulletCheck> {
    let vol = coupling.geometry().volume();
    let (rho, t) = (coupling.rho(), cfg.t_max);
    let depth = rho * t.exp() - cfg.lambda_next;
    let top = vol * ((2.0 * t).exp() - 2.0 * t) - 2.0 * cfg.a * cfg.a * t * t * depth;
    let chart = Chart::new(coupling, false);
    // on the lateral side the level-k modes are the worst directions
    let dirs = ball_directions(&chart, cfg.k)?;
    let lambda_k = cfg.lambda_k;
    let spectrum = coupling.spectrum();
    let worst: Vec<Coords> = dirs
        .into_iter()
        .filter(|d| {
            d.plus
                .iter()
                .zip(spectrum.abs_lambda())
                .any(|(z, &l)| z.norm() > 0.0 && (l - lambda_k).abs() <= 1e-12 * lambda_k)
        })
        .collect();
    let lateral = lateral_max(&chart, cfg, &worst, R_SAMPLES)?;
    Ok(BulletCheck { depth, top, lateral, vol })
}

/// Choose `(T, A, R)` for `lambda_k < rho < lambda_{k+1}`:
/// `T = log((lambda_{k+1} + 1)/rho)` so that `rho e^T - lambda_{k+1} >= 1`,
/// `A` from the top-face inequality in closed form with a 10% margin, and
/// `R` from a 256-point scan of the lateral excess over `vol` with a 20%
/// margin. All three inequalities are re-evaluated before returning.
pub fn select_linking_constants(coupling: &Coupling, k: usize, vol: f64) -> Result<LinkingConfig> {
    let (lambda_k, lambda_next) = check_regime(coupling, k)?;
    if !(vol > 0.0) {
        return Err(Error::InvalidArgument(format!("volume must be positive, got {vol}")));
    }
    let rho = coupling.rho();
    let t = ((lambda_next + 1.0) / rho).ln();
    let t = t + 1e-9 * t.abs().max(1.0);
    if !(t > 0.0) || 2.0 * t > OVERFLOW_GUARD {
        return Err(Error::Infeasible(format!("depth bullet: T = {t} leaves the overflow guard")));
    }
    let depth = rho * t.exp() - lambda_next;
    let a_sq = vol * ((2.0 * t).exp() - 2.0 * t - 1.0) / (2.0 * t * t * depth);
    let a = A_MARGIN * a_sq.sqrt();
    if !a.is_finite() {
        return Err(Error::Infeasible(format!("top-face bullet: no finite A for T = {t}")));
    }
    let c_prime = 2.0 * (rho - lambda_k) / (1.0 + lambda_k);
    let excess = (0..R_SAMPLES)
        .map(|i| {
            let s = t * i as f64 / (R_SAMPLES - 1) as f64;
            vol * ((2.0 * s).exp() - 2.0 * s) + 2.0 * a * a * s * s * (lambda_next - rho * s.exp()) - vol
        })
        .fold(0.0f64, f64::max);
    let r_sq = R_MARGIN * excess / c_prime;
    if !(r_sq.is_finite() && r_sq < 1e8) {
        return Err(Error::Infeasible(format!(
            "lateral bullet: R^2 = {r_sq:.3e} (rho is {:.3e} above lambda_k)",
            rho - lambda_k
        )));
    }
    let r = r_sq.sqrt().max(0.5);
    let seed = 7;
    let domination = domination_constant(coupling, 100, 1.0, seed)?.max;
    let cfg = LinkingConfig {
        k,
        lambda_k,
        lambda_next,
        t_max: t,
        a,
        r,
        cylinder_grid: (17, 3),
        tau: 4.0 * (1.0 + domination * domination * rho * rho),
        domination,
        deform_steps: 300,
        step_size: 1.0,
        tol: 1e-8,
        theta_radius: 0.05,
        theta_samples: 2000,
        seed,
        trace_energy: false,
    };
    let check = verify_bullets(coupling, &cfg)?;
    if check.depth < 1.0 {
        return Err(Error::Infeasible(format!("depth bullet fails: rho e^T - lambda = {}", check.depth)));
    }
    if !(check.top < vol) {
        return Err(Error::Infeasible(format!("top-face bullet fails: {} >= {vol}", check.top)));
    }
    if !(check.lateral < vol) {
        return Err(Error::Infeasible(format!("lateral bullet fails: {} >= {vol}", check.lateral)));
    }
    Ok(cfg)
}

/// Node layout of the discretized cylinder: `n_t` levels in `t`, each with
/// the axis point and `n_ball` rings along `+-e_d` for every ball direction.
struct Cylinder {
    n_t: usize,
    n_ball: usize,
    dirs: Vec<Coords>,
}

impl Cylinder {
    fn per_level(&self) -> usize {
        1 + 2 * self.dirs.len() * self.n_ball
    }

    fn len(&self) -> usize {
        self.n_t * self.per_level()
    }

    /// `(t index, ball offset)` where the offset is `None` on the axis and
    /// `Some((direction, sign, ring))` otherwise, ring counted from 1.
    fn locate(&self, node: usize) -> (usize, Option<(usize, f64, usize)>) {
        let (i, b) = (node / self.per_level(), node % self.per_level());
        if b == 0 {
            return (i, None);
        }
        let b = b - 1;
        let ring = b % self.n_ball + 1;
        let ds = b / self.n_ball;
        (i, Some((ds / 2, if ds % 2 == 0 { 1.0 } else { -1.0 }, ring)))
    }

    fn is_boundary(&self, node: usize) -> bool {
        let (i, off) = self.locate(node);
        i == 0 || i == self.n_t - 1 || matches!(off, Some((_, _, ring)) if ring == self.n_ball)
    }

    fn ball_point(&self, off: Option<(usize, f64, usize)>, r: f64) -> Option<Coords> {
        off.map(|(d, sign, ring)| self.dirs[d].scaled(sign * r * ring as f64 / self.n_ball as f64))
    }
}

/// Energies on the pinned boundary `L_2` of the cylinder.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundarySweep {
    /// Max over the bottom face `t = 0`, the origin excluded (there `J = vol`).
    pub bottom: f64,
    pub top: f64,
    pub lateral: f64,
    pub points: usize,
    pub vol: f64,
}

impl BoundarySweep {
    pub fn max(&self) -> f64 {
        self.bottom.max(self.top).max(self.lateral)
    }

    pub fn below_vol(&self) -> bool {
        self.max() < self.vol
    }
}

/// Evaluate `J` on the cylinder boundary: the top and bottom faces on the
/// configured ball grid and the lateral side on 64 levels of `t`.
pub fn linking_boundary_sweep(coupling: &Coupling, cfg: &LinkingConfig) -> Result<BoundarySweep> {
    check_regime(coupling, cfg.k)?;
    let chart = Chart::new(coupling, false);
    let cyl = Cylinder {
        n_t: cfg.cylinder_grid.0,
        n_ball: cfg.cylinder_grid.1,
        dirs: ball_directions(&chart, cfg.k)?,
    };
    let mut sweep = BoundarySweep {
        bottom: f64::NEG_INFINITY,
        top: f64::NEG_INFINITY,
        lateral: f64::NEG_INFINITY,
        points: 0,
        vol: coupling.geometry().volume(),
    };
    for b in 1..cyl.per_level() {
        let phi = cyl.ball_point(cyl.locate(b).1, cfg.r).expect("off-axis");
        for (t, slot) in [(0.0, &mut sweep.bottom), (cfg.t_max, &mut sweep.top)] {
            let x = cylinder_point(&chart, cfg, t, &phi)?;
            *slot = slot.max(chart.eval(&x, None)?.j());
            sweep.points += 1;
        }
    }
    let x = cylinder_point(&chart, cfg, cfg.t_max, &chart.zeros())?;
    sweep.top = sweep.top.max(chart.eval(&x, None)?.j());
    sweep.lateral = lateral_max(&chart, cfg, &cyl.dirs, 64)?;
    sweep.points += 1 + 64 * 2 * cyl.dirs.len();
    Ok(sweep)
}

/// Linking critical point of `J` on `N`.
///
/// The boundary of the discretized cylinder is checked to lie strictly below
/// `vol` and pinned; interior nodes above `vol` take Armijo steps along the
/// gradient component normal to the cylinder. When the max stagnates, the top
/// node is refined to the saddle along the `t`-tangent and the ball
/// directions, then polished by Newton.
pub fn linking(coupling: &Coupling, cfg: &LinkingConfig) -> Result<MinMaxSolution> {
    check_regime(coupling, cfg.k)?;
    let (n_t, n_ball) = cfg.cylinder_grid;
    if n_t < 3 || n_ball < 1 {
        return Err(Error::InvalidArgument(format!("cylinder grid {:?} is too coarse", cfg.cylinder_grid)));
    }
    let check = verify_bullets(coupling, cfg)?;
    if !check.holds() {
        return Err(Error::Infeasible(format!("linking constants violate the bullets: {check:?}")));
    }
    let vol = coupling.geometry().volume();
    let chart = Chart::new(coupling, cfg.trace_energy);
    let cyl = Cylinder {
        n_t,
        n_ball,
        dirs: ball_directions(&chart, cfg.k)?,
    };

    chart.set_phase("init", 0);
    let mut nodes: Vec<ChartPoint> = Vec::with_capacity(cyl.len());
    for node in 0..cyl.len() {
        let (i, off) = cyl.locate(node);
        let t = cfg.t_max * i as f64 / (n_t - 1) as f64;
        let phi = cyl.ball_point(off, cfg.r).unwrap_or_else(|| chart.zeros());
        let x = cylinder_point(&chart, cfg, t, &phi)?;
        let p = chart.eval(&x, None)?;
        if cyl.is_boundary(node) && node != 0 && p.j() >= vol {
            return Err(Error::BoundaryViolation { node, value: p.j(), bound: vol });
        }
        nodes.push(p);
    }
    let boundary = linking_boundary_sweep(coupling, cfg)?;
    if !boundary.below_vol() {
        return Err(Error::BoundaryViolation {
            node: usize::MAX,
            value: boundary.max(),
            bound: vol,
        });
    }

    let per = cyl.per_level();
    let t_tangent = |nodes: &[ChartPoint], node: usize| nodes[node + per].x.sub(&nodes[node - per].x);
    let mut alpha = vec![cfg.step_size; nodes.len()];
    let top_of = |nodes: &[ChartPoint]| {
        nodes
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, p)| if p.j() > bv { (i, p.j()) } else { (bi, bv) })
    };
    let (mut top, mut max) = top_of(&nodes);
    let mut history = vec![max];
    for sweep in 1..=cfg.deform_steps {
        chart.set_phase("deform", sweep);
        let mut next = nodes.clone();
        for node in 0..nodes.len() {
            if cyl.is_boundary(node) || nodes[node].j() <= vol {
                continue;
            }
            let mut tangents = vec![t_tangent(&nodes, node)];
            tangents.extend(cyl.dirs.iter().cloned());
            if let Some((p, a)) = perpendicular_step(&chart, &nodes[node], tangents, alpha[node])? {
                next[node] = p;
                alpha[node] = (2.0 * a).min(4.0 * cfg.step_size);
            } else {
                alpha[node] = (0.5 * alpha[node]).max(1e-8);
            }
        }
        nodes = next;
        (top, max) = top_of(&nodes);
        history.push(max);
        chart.set_phase("sweep", sweep);
        chart.record(Some(top), &nodes[top]);
        if max <= vol * (1.0 + 1e-10) {
            return Err(Error::PathCollapse { level: max, trivial: vol });
        }
        if sweep > STAGNATION_WINDOW && history[sweep - STAGNATION_WINDOW] - max <= STAGNATION_DROP * max.abs() {
            break;
        }
    }
    if cyl.is_boundary(top) {
        return Err(Error::PathCollapse { level: max, trivial: vol });
    }

    let mut basis = vec![t_tangent(&nodes, top)];
    basis.extend(cyl.dirs.iter().cloned());
    let cone = Cone {
        bins: cyl.dirs.iter().filter_map(|d| d.plus.iter().position(|z| z.norm() > 0.0)).collect(),
        tau: cfg.tau,
    };
    let first = first_mode_above(coupling, cfg.k);
    let mut solution = finish(&chart, nodes[top].clone(), basis, history, cfg.tol, |chart| {
        sample_theta(chart, cfg.theta_radius, cfg.theta_samples, cfg.seed, first, Some(&cone))
    })?;
    solution.boundary = Some(boundary);
    Ok(solution)
}
