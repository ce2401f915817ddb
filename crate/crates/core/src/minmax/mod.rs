//! Min-max drivers for nontrivial critical points: mountain pass below the
//! first Dirac eigenvalue and linking between consecutive eigenvalue levels,
//! plus constrained descent, Newton polish and the uniformization solve.
//!
//! Paths and cylinders live in chart coordinates `(u, psi^+)`; the negative
//! spinor part is always the fiber completion, so every node is on `N`.

mod chart;
mod descent;
mod linking;
mod mountain;
mod newton;
mod saddle;
mod uniformize;

use serde::{Deserialize, Serialize};

use crate::energy::{Coupling, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::nehari::NehariPoint;

pub use descent::{descend, Descent};
pub use linking::{
    linking, linking_boundary_sweep, select_linking_constants, verify_bullets, BoundarySweep, BulletCheck,
    LinkingConfig,
};
pub use mountain::{mountain_pass, MountainPassConfig};
pub use newton::{newton_polish, newton_polish_logged, NewtonLog, NEWTON_TOL};
pub use saddle::{ClimbStats, ThetaEstimate};
pub use uniformize::uniformize;

/// Which min-max construction to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Mountain pass if `rho < lambda_1`, linking otherwise.
    Auto,
    MountainPass,
    Linking,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Regime::Auto),
            "mp" | "mountain_pass" => Ok(Regime::MountainPass),
            "link" | "linking" => Ok(Regime::Linking),
            other => Err(Error::InvalidArgument(format!(
                "unknown regime '{other}', expected auto, mp or link"
            ))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Auto => "auto",
            Regime::MountainPass => "mp",
            Regime::Linking => "link",
        })
    }
}

/// One line of the energy trace.
#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub phase: &'static str,
    pub step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    #[serde(flatten)]
    pub energy: EnergyBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_norm: Option<f64>,
}

/// A nontrivial critical point produced by a min-max driver.
#[derive(Clone, Debug)]
pub struct MinMaxSolution {
    pub point: NehariPoint,
    /// `J` at the returned point.
    pub level: f64,
    pub energy: EnergyBreakdown,
    /// `||r_u|| + ||r_psi||` after the Newton polish.
    pub residual: f64,
    pub theta: ThetaEstimate,
    /// Max of `J` over the nodes after every deformation sweep.
    pub max_history: Vec<f64>,
    /// Energies on the pinned boundary (linking only).
    pub boundary: Option<BoundarySweep>,
    pub climb: ClimbStats,
    pub newton: NewtonLog,
    pub evaluations: usize,
    pub trace: Vec<TraceRecord>,
}

/// Index `k` of the distinct eigenvalue levels with `lambda_k < rho <
/// lambda_{k+1}` (levels counted from 1), or 0 below the first level.
pub fn level_index(coupling: &Coupling) -> usize {
    coupling
        .spectrum()
        .levels()
        .iter()
        .take_while(|&&l| l < coupling.rho())
        .count()
}

/// Options shared by [`solve`] for both drivers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub regime: Regime,
    pub tol: f64,
    pub seed: u64,
    pub trace_energy: bool,
    pub path_nodes: usize,
    pub deform_steps: usize,
    pub theta_radius: f64,
    pub theta_samples: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            regime: Regime::Auto,
            tol: 1e-8,
            seed: 7,
            trace_energy: false,
            path_nodes: 17,
            deform_steps: 300,
            theta_radius: 0.05,
            theta_samples: 2000,
        }
    }
}

/// What [`solve`] ran and found.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub regime: Regime,
    pub solution: MinMaxSolution,
    pub mountain_pass: Option<MountainPassConfig>,
    pub linking: Option<LinkingConfig>,
}

/// Dispatch to the driver matching `rho`'s position in the spectrum; an
/// explicit regime that does not match is refused.
pub fn solve(coupling: &Coupling, options: &SolveOptions) -> Result<SolveOutcome> {
    let k = level_index(coupling);
    let regime = match options.regime {
        Regime::Auto if k == 0 => Regime::MountainPass,
        Regime::Auto => Regime::Linking,
        r => r,
    };
    match regime {
        Regime::MountainPass => {
            let mut cfg = MountainPassConfig::for_coupling(coupling)?;
            cfg.path_nodes = options.path_nodes;
            cfg.deform_steps = options.deform_steps;
            cfg.tol = options.tol;
            cfg.seed = options.seed;
            cfg.theta_radius = options.theta_radius;
            cfg.theta_samples = options.theta_samples;
            cfg.trace_energy = options.trace_energy;
            let solution = mountain_pass(coupling, &cfg)?;
            Ok(SolveOutcome {
                regime,
                solution,
                mountain_pass: Some(cfg),
                linking: None,
            })
        }
        _ => {
            if k == 0 {
                return Err(regime_error(coupling, "linking", "rho lies below the first eigenvalue"));
            }
            let vol = coupling.geometry().volume();
            let mut cfg = select_linking_constants(coupling, k, vol)?;
            cfg.tol = options.tol;
            cfg.seed = options.seed;
            cfg.theta_radius = options.theta_radius;
            cfg.theta_samples = options.theta_samples;
            cfg.trace_energy = options.trace_energy;
            cfg.deform_steps = options.deform_steps;
            cfg.cylinder_grid.0 = options.path_nodes;
            let solution = linking(coupling, &cfg)?;
            Ok(SolveOutcome {
                regime: Regime::Linking,
                solution,
                mountain_pass: None,
                linking: Some(cfg),
            })
        }
    }
}

pub(crate) fn regime_error(coupling: &Coupling, regime: &'static str, detail: &str) -> Error {
    Error::Regime {
        rho: coupling.rho(),
        regime,
        detail: format!(
            "{detail}; eigenvalue levels start {:?}",
            coupling.spectrum().levels().iter().take(4).collect::<Vec<_>>()
        ),
    }
}
