//! Run configuration, artifacts and exit codes.
//!
//! A `solve` run writes into its output directory:
//! `u.slfd`, `psi.slfd` (the solution), `report.json` and `trace.jsonl`.
//! The directory is locked for the duration of the run.

mod config;
pub mod slfd;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

pub use config::{emit_config, parse_config, RunConfig, KEYS};

use crate::energy::{el_residual, evaluate, moser_trudinger_report, Coupling, EnergyBreakdown, MtProbe};
use crate::error::{Error, Result};
use crate::minmax::{
    self, level_index, verify_bullets, BoundarySweep, BulletCheck, ClimbStats, LinkingConfig, MountainPassConfig,
    Regime,
};
use crate::nehari::{
    constrained_gradient, full_gradient_norm, multipliers, ps_identities, IdentityReport, NehariPoint,
};
use crate::spectral::{build_geometry, eigendecompose, DiracSpectrum, ScalarField, SpinorField, TorusGeometry};

pub const VERSION: &str = concat!("superliouville ", env!("CARGO_PKG_VERSION"));

/// Declared in every report.
pub const GEOMETRY_NOTE: &str = "flat torus with a kernel-free spin structure; the area vol = L1*L2 takes the \
                                 place of 4 pi (genus - 1) and the background curvature is K = -1";

pub const LOCK_FILE: &str = ".superliouville.lock";

/// Exit status for an error: 2 when the request cannot be met as posed
/// (regime, constants, coupling on the spectrum, bad input), 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Regime { .. }
        | Error::Infeasible(_)
        | Error::CouplingOnSpectrum { .. }
        | Error::KernelPresent { .. }
        | Error::Config { .. }
        | Error::InvalidGeometry(_)
        | Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// Exclusive hold on an artifact directory; released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Io(std::io::Error::new(
                e.kind(),
                format!("{} is locked by another run ({})", dir.display(), path.display()),
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn geometry_of(cfg: &RunConfig) -> Result<Arc<TorusGeometry>> {
    build_geometry(cfg.l1, cfg.l2, cfg.n1, cfg.n2, (cfg.delta1, cfg.delta2))
}

/// Spectrum CSV with columns `j, lambda, k1, k2`, where `(k1, k2)` is the
/// integer Fourier index of the mode. Modes are listed by increasing `|lambda|`;
/// `count` limits the number of rows.
pub fn spectrum_csv(spectrum: &DiracSpectrum, count: Option<usize>) -> String {
    let g = spectrum.geometry();
    let mut out = String::from("j,lambda,k1,k2\n");
    for m in spectrum.modes().into_iter().take(count.unwrap_or(usize::MAX)) {
        let [k1, k2] = g.signed_mode(m.bin);
        out += &format!("{},{:?},{},{}\n", m.index, m.lambda, k1, k2);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSummary {
    pub kernel_dim: usize,
    pub lambda_1: f64,
    /// First few distinct positive eigenvalues.
    pub levels: Vec<f64>,
    /// Number of levels below `rho`.
    pub level_index: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub regime: Regime,
    pub level: f64,
    pub vol: f64,
    /// `level - vol`
    pub excess: f64,
    pub energy: EnergyBreakdown,
    pub residual: f64,
    pub residual_u: f64,
    pub residual_psi: f64,
    /// EL residual of `(u, -psi)`.
    pub antipodal_residual: f64,
    pub identities: IdentityReport,
    pub theta: minmax::ThetaEstimate,
    pub psi_l2: f64,
    pub u_mean: f64,
    pub constraint_norm: f64,
    pub mountain_pass: Option<MountainPassConfig>,
    pub linking: Option<LinkingConfig>,
    pub bullets: Option<BulletCheck>,
    pub boundary: Option<BoundarySweep>,
    pub max_history: Vec<f64>,
    pub climb: ClimbStats,
    pub newton_residuals: Vec<f64>,
    pub krylov_iterations: Vec<usize>,
    pub evaluations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub status: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub geometry_note: &'static str,
    pub manifest: BTreeMap<&'static str, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolveSummary>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// What [`run`] produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Report,
    pub dir: PathBuf,
}

struct Solved {
    summary: SolveSummary,
    u: ScalarField,
    psi: SpinorField,
    trace: Vec<String>,
}

fn summarize_spectrum(coupling: &Coupling) -> SpectrumSummary {
    let s = coupling.spectrum();
    SpectrumSummary {
        kernel_dim: s.kernel_dim(),
        lambda_1: s.lambda_1(),
        levels: s.levels().into_iter().take(4).collect(),
        level_index: level_index(coupling),
    }
}

fn solve_and_check(coupling: &Coupling, cfg: &RunConfig) -> Result<Solved> {
    let outcome = minmax::solve(coupling, &cfg.solve_options())?;
    let sol = outcome.solution;
    let vol = coupling.geometry().volume();
    let (u, psi) = (sol.point.u(), sol.point.psi());
    let (ru, rp) = el_residual(coupling, u, psi)?;
    let (au, ap) = el_residual(coupling, u, &psi.scale(-1.0))?;
    let identities = ps_identities(coupling, &sol.point)?;
    let bullets = match &outcome.linking {
        Some(l) => Some(verify_bullets(coupling, l)?),
        None => None,
    };
    let mut trace = Vec::with_capacity(sol.trace.len() + 1);
    for r in &sol.trace {
        trace.push(serde_json::to_string(r)?);
    }
    #[derive(Serialize)]
    struct IdentityRow<'a> {
        phase: &'static str,
        #[serde(flatten)]
        report: &'a IdentityReport,
    }
    trace.push(serde_json::to_string(&IdentityRow {
        phase: "identities",
        report: &identities,
    })?);
    let summary = SolveSummary {
        regime: outcome.regime,
        level: sol.level,
        vol,
        excess: sol.level - vol,
        energy: sol.energy,
        residual: sol.residual,
        residual_u: ru.norm_l2(),
        residual_psi: rp.norm_l2(),
        antipodal_residual: au.norm_l2() + ap.norm_l2(),
        identities,
        theta: sol.theta,
        psi_l2: psi.norm_l2(),
        u_mean: u.mean(),
        constraint_norm: sol.point.constraint_norm(),
        mountain_pass: outcome.mountain_pass,
        linking: outcome.linking,
        bullets,
        boundary: sol.boundary,
        max_history: sol.max_history,
        climb: sol.climb,
        newton_residuals: sol.newton.residuals,
        krylov_iterations: sol.newton.krylov_iterations,
        evaluations: sol.evaluations,
    };
    let (u, psi) = sol.point.into_parts();
    Ok(Solved { summary, u, psi, trace })
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Run a `solve` job. Artifacts go to `cfg.out`; the report is written on
/// success and on solver failure. Errors before the directory is locked (or
/// a held lock) are returned as `Err`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    if let Err((key, message)) = cfg.check() {
        return Err(Error::InvalidArgument(format!("{key}: {message}")));
    }
    let dir = PathBuf::from(&cfg.out);
    let _lock = DirLock::acquire(&dir)?;
    let mut report = Report {
        version: VERSION,
        status: "certified",
        exit_code: 0,
        error: None,
        geometry_note: GEOMETRY_NOTE,
        manifest: cfg.manifest(),
        spectrum: None,
        solution: None,
    };
    for stale in ["u.slfd", "psi.slfd", "trace.jsonl"] {
        let p = dir.join(stale);
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    let result = geometry_of(cfg)
        .and_then(|g| Coupling::with_gap_tol(Arc::new(eigendecompose(&g)), cfg.rho, cfg.gap_tol))
        .and_then(|c| {
            report.spectrum = Some(summarize_spectrum(&c));
            solve_and_check(&c, cfg)
        });
    match result {
        Ok(solved) => {
            slfd::save_scalar(&dir.join("u.slfd"), &solved.u)?;
            slfd::save_spinor(&dir.join("psi.slfd"), &solved.psi)?;
            if cfg.trace {
                let mut text = solved.trace.join("\n");
                text.push('\n');
                write_atomic(&dir.join("trace.jsonl"), text.as_bytes())?;
            }
            report.solution = Some(solved.summary);
        }
        Err(e) => {
            report.status = "failed";
            report.exit_code = exit_code(&e);
            report.error = Some(e.to_string());
        }
    }
    write_atomic(&dir.join("report.json"), report.to_json()?.as_bytes())?;
    Ok(RunOutcome {
        exit_code: report.exit_code,
        report,
        dir,
    })
}

/// Certification of a dumped point.
#[derive(Clone, Debug, Serialize)]
pub struct NehariCheck {
    pub certified: bool,
    pub constraint_norm: f64,
    pub energy: EnergyBreakdown,
    pub residual_u: f64,
    pub residual_psi: f64,
    /// Constrained and full gradient norms and the multiplier norm, for
    /// certified points only.
    pub constrained_gradient_norm: Option<f64>,
    pub full_gradient_norm: Option<f64>,
    pub multiplier_norm: Option<f64>,
    pub identities: IdentityReport,
}

/// Re-certify the point stored in two SLFD dumps against coupling `rho`.
pub fn nehari_check(u_path: &Path, psi_path: &Path, rho: f64, gap_tol: f64) -> Result<NehariCheck> {
    let du = slfd::load(u_path)?;
    let g = du.header.geometry()?;
    let u = du.into_scalar(&g)?;
    let psi = slfd::load(psi_path)?.into_spinor(&g)?;
    let coupling = Coupling::with_gap_tol(Arc::new(eigendecompose(&g)), rho, gap_tol)?;
    check_point(&coupling, u, psi)
}

pub fn check_point(coupling: &Coupling, u: ScalarField, psi: SpinorField) -> Result<NehariCheck> {
    let energy = evaluate(coupling, &u, &psi)?;
    let (ru, rp) = el_residual(coupling, &u, &psi)?;
    let point = NehariPoint::new(coupling, u, psi)?;
    let (cg, fg, mn) = if point.certified() {
        (
            Some(constrained_gradient(coupling, &point)?.2),
            Some(full_gradient_norm(coupling, &point)?),
            Some(multipliers(coupling, &point)?.norm),
        )
    } else {
        (None, None, None)
    };
    Ok(NehariCheck {
        certified: point.certified(),
        constraint_norm: point.constraint_norm(),
        energy,
        residual_u: ru.norm_l2(),
        residual_psi: rp.norm_l2(),
        constrained_gradient_norm: cg,
        full_gradient_norm: fg,
        multiplier_norm: mn,
        identities: ps_identities(coupling, &point)?,
    })
}

/// Moser-Trudinger probe on the configured geometry.
pub fn mt_probe(geometry: &Arc<TorusGeometry>, samples: usize, seed: u64) -> Result<MtProbe> {
    moser_trudinger_report(geometry, samples, seed)
}
