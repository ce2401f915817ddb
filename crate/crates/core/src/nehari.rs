//! The constraint map `G(u, psi) = P^-[(1 + |D|)^{-1}(D psi - rho e^u psi)]`,
//! its zero set `N`, the fiber completion `psi^+ -> psi^-`, Lagrange
//! multipliers, constrained gradients and the Palais-Smale diagnostics.
//!
//! Every fiber `N_u = {psi : G(u, psi) = 0}` is a linear subspace: with
//! `A = |D| + rho P^- M_u P^-` on the negative modes, the completion of
//! `psi^+` solves `A psi^- = -rho P^- M_u psi^+`. `A` is symmetric positive
//! definite, so the completion exists and is unique.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::{evaluate_modes, Background, Coupling};
use crate::error::{Error, Result};
use crate::linalg::{self, pack, unpack};
use crate::sampling;
use crate::spectral::{h1_norm, ModeCoeffs, ScalarField, SpinorField};

/// Certification threshold on `||G||_{H^{1/2}}`.
pub const NEHARI_TOL: f64 = 1e-10;
/// Target on the fiber solver residual, relative to `max(1, ||psi^+||)`.
pub const FIBER_TOL: f64 = 1e-12;
const RELAXATION: f64 = 0.5;
const STALL_LIMIT: usize = 50;
const FIXED_POINT_CAP: usize = 400;
const KRYLOV_CAP: usize = 2000;

/// A point of the Nehari manifold with its certified constraint residual.
///
/// Fields are read-only: a modified point has to be rebuilt (and thereby
/// re-certified) through [`NehariPoint::new`] or [`project_to_fiber`].
#[derive(Clone, Debug)]
pub struct NehariPoint {
    u: ScalarField,
    psi: SpinorField,
    constraint_norm: f64,
    certified: bool,
}

impl NehariPoint {
    /// Wrap `(u, psi)` and certify it against [`NEHARI_TOL`].
    pub fn new(coupling: &Coupling, u: ScalarField, psi: SpinorField) -> Result<Self> {
        coupling.check(&u, &psi)?;
        let bg = Background::new(&u)?;
        let a = coupling.spectrum().analyze(&psi);
        let constraint_norm = constraint_norm_modes(coupling, &bg, &a)?;
        Ok(NehariPoint {
            u,
            psi,
            constraint_norm,
            certified: constraint_norm <= NEHARI_TOL,
        })
    }

    pub(crate) fn from_modes(coupling: &Coupling, u: ScalarField, a: &ModeCoeffs, bg: &Background) -> Result<Self> {
        let constraint_norm = constraint_norm_modes(coupling, bg, a)?;
        Ok(NehariPoint {
            psi: coupling.spectrum().synthesize(a),
            u,
            constraint_norm,
            certified: constraint_norm <= NEHARI_TOL,
        })
    }

    /// The trivial point `(0, 0)`.
    pub fn trivial(coupling: &Coupling) -> Self {
        let g = coupling.geometry().clone();
        NehariPoint {
            u: ScalarField::zeros(g.clone()),
            psi: SpinorField::zeros(g),
            constraint_norm: 0.0,
            certified: true,
        }
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn psi(&self) -> &SpinorField {
        &self.psi
    }

    pub fn constraint_norm(&self) -> f64 {
        self.constraint_norm
    }

    pub fn certified(&self) -> bool {
        self.certified
    }

    pub fn into_parts(self) -> (ScalarField, SpinorField) {
        (self.u, self.psi)
    }

    pub(crate) fn require_certified(&self) -> Result<()> {
        if self.certified {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "point is not certified on the Nehari manifold (||G|| = {:.3e})",
                self.constraint_norm
            )))
        }
    }
}

/// `r = P^-(D psi - rho M_u psi)` on the negative modes.
fn negative_residual(coupling: &Coupling, bg: &Background, a: &ModeCoeffs) -> Vec<Complex64> {
    let spectrum = coupling.spectrum();
    let ma = bg.mult(spectrum, a);
    let lam = spectrum.abs_lambda();
    (0..a.len())
        .map(|k| -lam[k] * a.minus[k] - coupling.rho() * ma.minus[k])
        .collect()
}

/// `||G||_{H^{1/2}} = sqrt(sum |r_j|^2 / (1 + |lambda_j|))`.
fn g_norm(lam: &[f64], r: &[Complex64]) -> f64 {
    r.iter().zip(lam).map(|(z, l)| z.norm_sqr() / (1.0 + l)).sum::<f64>().sqrt()
}

fn constraint_norm_modes(coupling: &Coupling, bg: &Background, a: &ModeCoeffs) -> Result<f64> {
    coupling.spectrum().require_kernel_free()?;
    let r = negative_residual(coupling, bg, a);
    Ok(g_norm(coupling.spectrum().abs_lambda(), &r))
}

/// The constraint spinor `G(u, psi)`; it lies in the negative subspace.
pub fn constraint_g(coupling: &Coupling, u: &ScalarField, psi: &SpinorField) -> Result<SpinorField> {
    coupling.check(u, psi)?;
    coupling.spectrum().require_kernel_free()?;
    let bg = Background::new(u)?;
    let spectrum = coupling.spectrum();
    let a = spectrum.analyze(psi);
    let r = negative_residual(coupling, &bg, &a);
    let mut out = ModeCoeffs::zeros(a.len());
    for (k, z) in r.iter().enumerate() {
        out.minus[k] = z / (1.0 + spectrum.abs_lambda()[k]);
    }
    Ok(spectrum.synthesize(&out))
}

/// Which branch of the fiber solver finished the solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberMethod {
    Direct,
    FixedPoint,
    Krylov,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FiberStats {
    pub method: FiberMethod,
    pub iterations: usize,
    pub constraint_norm: f64,
}

/// Solve for the negative part completing `plus` (whose minus slots are
/// ignored) to a point of `N_u`. `warm` seeds the iteration.
pub(crate) fn solve_fiber(
    coupling: &Coupling,
    bg: &Background,
    plus: &ModeCoeffs,
    warm: Option<&[Complex64]>,
) -> Result<(ModeCoeffs, FiberStats)> {
    let spectrum = coupling.spectrum();
    spectrum.require_kernel_free()?;
    let rho = coupling.rho();
    let lam = spectrum.abs_lambda();
    let n = plus.len();
    let mut a = plus.positive_part();
    if let Some(w) = warm {
        a.minus.copy_from_slice(w);
    }
    let scale = spectrum.h_half_sq(&plus.positive_part()).sqrt().max(1.0);
    let tol = FIBER_TOL * scale;

    let mut r = negative_residual(coupling, bg, &a);
    let mut res = g_norm(lam, &r);
    if res <= tol {
        return Ok((a, FiberStats { method: FiberMethod::Direct, iterations: 0, constraint_norm: res }));
    }

    // relaxed fixed point x <- x + w |D|^{-1} (b - A x); note r = b - A x
    let mut stalled = 0;
    let mut iterations = 0;
    while iterations < FIXED_POINT_CAP {
        iterations += 1;
        for k in 0..n {
            a.minus[k] += r[k] * (RELAXATION / lam[k]);
        }
        r = negative_residual(coupling, bg, &a);
        let new_res = g_norm(lam, &r);
        if !new_res.is_finite() {
            return Err(Error::NonFinite("fiber fixed point"));
        }
        if new_res <= tol {
            return Ok((a, FiberStats { method: FiberMethod::FixedPoint, iterations, constraint_norm: new_res }));
        }
        if new_res > res {
            // divergent: the relaxed map is not a contraction for this rho e^u
            res = new_res;
            break;
        }
        if new_res > 0.9 * res {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                res = new_res;
                break;
            }
        }
        res = new_res;
    }

    // Krylov fallback on A x = b over the negative modes
    let mp = bg.mult(spectrum, &plus.positive_part());
    let b = pack(&mp.minus.iter().map(|z| -rho * z).collect::<Vec<_>>());
    let apply = |x: &[f64]| {
        let mut m = ModeCoeffs::zeros(n);
        m.minus = unpack(x);
        let mm = bg.mult(spectrum, &m);
        let out: Vec<Complex64> = (0..n).map(|k| lam[k] * m.minus[k] + rho * mm.minus[k]).collect();
        pack(&out)
    };
    let shift = rho * bg.mean_exp_u();
    let precond = |r: &[f64]| {
        r.chunks_exact(2)
            .zip(lam)
            .flat_map(|(p, l)| [p[0] / (l + shift), p[1] / (l + shift)])
            .collect()
    };
    let measure = |r: &[f64]| {
        r.chunks_exact(2)
            .zip(lam)
            .map(|(p, l)| (p[0] * p[0] + p[1] * p[1]) / (1.0 + l))
            .sum::<f64>()
            .sqrt()
    };
    let (x, out) = linalg::cg(apply, precond, measure, &b, pack(&a.minus), tol, KRYLOV_CAP);
    a.minus = unpack(&x);
    let final_res = g_norm(lam, &negative_residual(coupling, bg, &a));
    if !out.converged && final_res > tol {
        let gap = spectrum.distance_to_spectrum(rho).0;
        return Err(Error::NotConverged {
            solver: "fiber projection",
            iterations: iterations + out.iterations,
            residual: final_res.min(res),
            detail: format!(
                "rho = {rho}, distance to spectrum {gap:.3e}, max e^u = {:.3e}",
                bg.max_exp_u()
            ),
        });
    }
    Ok((
        a,
        FiberStats {
            method: FiberMethod::Krylov,
            iterations: iterations + out.iterations,
            constraint_norm: final_res,
        },
    ))
}

/// Complete a purely positive spinor `psi_plus` to the point of `N_u`.
pub fn project_to_fiber(coupling: &Coupling, u: &ScalarField, psi_plus: &SpinorField) -> Result<NehariPoint> {
    project_to_fiber_with_stats(coupling, u, psi_plus).map(|(p, _)| p)
}

pub fn project_to_fiber_with_stats(
    coupling: &Coupling,
    u: &ScalarField,
    psi_plus: &SpinorField,
) -> Result<(NehariPoint, FiberStats)> {
    coupling.check(u, psi_plus)?;
    let spectrum = coupling.spectrum();
    spectrum.require_kernel_free()?;
    let a = spectrum.analyze(psi_plus);
    let neg = a.negative_part().norm_sq().sqrt();
    let total = a.norm_sq().sqrt();
    if neg > 1e-12 * total.max(1e-300) {
        return Err(Error::InvalidArgument(format!(
            "fiber projection needs a positive-mode spinor; negative part has L2 norm {neg:.3e}"
        )));
    }
    let bg = Background::new(u)?;
    let (full, stats) = solve_fiber(coupling, &bg, &a.positive_part(), None)?;
    Ok((NehariPoint::from_modes(coupling, u.clone(), &full, &bg)?, stats))
}

/// `||psi^-||_{H^{1/2}} / (rho ||psi^+||_{H^{1/2}})` at a point.
pub fn domination_ratio(coupling: &Coupling, point: &NehariPoint) -> Result<f64> {
    let spectrum = coupling.spectrum();
    let a = spectrum.analyze(point.psi());
    let plus = spectrum.h_half_sq(&a.positive_part()).sqrt();
    let minus = spectrum.h_half_sq(&a.negative_part()).sqrt();
    if plus == 0.0 {
        return Ok(0.0);
    }
    Ok(minus / (coupling.rho() * plus))
}

/// Summary of sampled `psi^-`-domination ratios.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DominationStats {
    /// Largest observed `||psi^-|| / (rho ||psi^+||)`: the empirical constant.
    pub max: f64,
    pub mean: f64,
    pub samples: usize,
}

/// Sample the domination ratio over random band-limited `u` with
/// `sup |u| <= amplitude` and random low-mode `psi^+`.
pub fn domination_constant(
    coupling: &Coupling,
    samples: usize,
    amplitude: f64,
    seed: u64,
) -> Result<DominationStats> {
    use rand::{Rng, SeedableRng};
    if samples == 0 || !(amplitude >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "domination sampling needs samples > 0 and amplitude >= 0, got {samples} and {amplitude}"
        )));
    }
    let spectrum = coupling.spectrum();
    spectrum.require_kernel_free()?;
    let g = coupling.geometry();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut max, mut sum) = (0.0f64, 0.0);
    for _ in 0..samples {
        let shape = sampling::band_scalar(g, &mut rng, 4, true);
        let sup = shape.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let amp = amplitude * rng.gen_range(0.0..=1.0) / sup.max(1e-300);
        let u = ScalarField::from_raw(g.clone(), shape.iter().map(|x| amp * x).collect());
        let mut plus = ModeCoeffs::zeros(spectrum.abs_lambda().len());
        plus.plus = sampling::band_plus(spectrum, &mut rng, 4.0);
        let bg = Background::new(&u)?;
        let (a, _) = solve_fiber(coupling, &bg, &plus, None)?;
        let ratio = spectrum.h_half_sq(&a.negative_part()).sqrt()
            / (coupling.rho() * spectrum.h_half_sq(&plus).sqrt());
        max = max.max(ratio);
        sum += ratio;
    }
    if !max.is_finite() {
        return Err(Error::NonFinite("domination constant"));
    }
    Ok(DominationStats {
        max,
        mean: sum / samples as f64,
        samples,
    })
}

/// `<dG(u, psi)[0, phi], phi>` in the H^{1/2} pairing, for negative-mode `phi`;
/// strictly negative whenever `phi != 0`.
pub fn constraint_hessian_form(coupling: &Coupling, u: &ScalarField, phi: &SpinorField) -> Result<f64> {
    coupling.check(u, phi)?;
    let spectrum = coupling.spectrum();
    spectrum.require_kernel_free()?;
    let bg = Background::new(u)?;
    let a = spectrum.analyze(phi).negative_part();
    let r = negative_residual(coupling, &bg, &a);
    // (1 + |lambda|) G_j paired with phi_j is just r_j paired with phi_j
    Ok(crate::spectral::dot(&r, &a.minus))
}

/// Inner product on tangent vectors `(v, h)` used to turn differentials into
/// gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Metric {
    /// `mean(u) mean(v) + int grad u . grad v` and the H^{1/2} product.
    Sobolev,
    /// `int uv + grad u . grad v` and the H^{1/2} product.
    Solver,
}

impl Metric {
    fn weight(self, coupling: &Coupling, k: usize) -> f64 {
        let g = coupling.geometry();
        let xi2 = g.scalar_wavenumber_sq(k);
        match self {
            Metric::Sobolev if k == 0 => 1.0 / g.volume(),
            Metric::Sobolev => xi2,
            Metric::Solver => 1.0 + xi2,
        }
    }

    /// Riesz representative of the L2 functional `v -> int g v`.
    pub fn riesz_u(self, coupling: &Coupling, g_u: &[f64]) -> Vec<f64> {
        let geo = coupling.geometry();
        let mut c = geo.coarse.forward_real(g_u);
        for (k, z) in c.iter_mut().enumerate() {
            *z /= self.weight(coupling, k);
        }
        geo.coarse.inverse_real(&c)
    }

    pub fn norm_sq_u(self, coupling: &Coupling, v: &[f64]) -> f64 {
        let geo = coupling.geometry();
        let c = geo.coarse.forward_real(v);
        geo.volume()
            * c.iter()
                .enumerate()
                .map(|(k, z)| self.weight(coupling, k) * z.norm_sqr())
                .sum::<f64>()
    }

    pub fn inner_u(self, coupling: &Coupling, a: &[f64], b: &[f64]) -> f64 {
        let geo = coupling.geometry();
        let (ca, cb) = (geo.coarse.forward_real(a), geo.coarse.forward_real(b));
        geo.volume()
            * (0..ca.len())
                .map(|k| self.weight(coupling, k) * (ca[k].conj() * cb[k]).re)
                .sum::<f64>()
    }

    pub fn riesz_psi(coupling: &Coupling, g: &ModeCoeffs) -> ModeCoeffs {
        let lam = coupling.spectrum().abs_lambda();
        let mut out = g.clone();
        for k in 0..g.len() {
            out.plus[k] /= 1.0 + lam[k];
            out.minus[k] /= 1.0 + lam[k];
        }
        out
    }
}

/// Tangent data at one point: its background, modes and L2 gradient.
pub(crate) struct Linearization<'a> {
    coupling: &'a Coupling,
    bg: Background,
    fine_psi: [Vec<Complex64>; 2],
    /// L2 gradient of J in u (`-2 r_u`) and in psi (`4 r_psi`).
    pub grad_u: Vec<f64>,
    pub grad_psi: ModeCoeffs,
}

impl<'a> Linearization<'a> {
    pub fn new(coupling: &'a Coupling, u: &ScalarField, a: &ModeCoeffs) -> Result<Self> {
        let bg = Background::new(u)?;
        let ev = evaluate_modes(coupling, u, a, &bg, true);
        let fine_psi = Background::spinor_fine(coupling.spectrum(), a);
        Ok(Linearization {
            coupling,
            grad_u: ev.r_u.iter().map(|r| -2.0 * r).collect(),
            grad_psi: ev.r_psi.scaled(4.0),
            bg,
            fine_psi,
        })
    }

    /// `B(v, h) = dG(u, psi)[v, h]` on the negative modes.
    fn constraint_derivative(&self, v: &[f64], h: &ModeCoeffs) -> Vec<Complex64> {
        let c = self.coupling;
        let spectrum = c.spectrum();
        let lam = spectrum.abs_lambda();
        let geo = c.geometry();
        let mh = self.bg.mult(spectrum, h);
        let iv = geo.prolong_scalar(v);
        let nv = {
            let fine = self.fine_psi.clone().map(|mut comp| {
                comp.iter_mut().zip(&iv).for_each(|(z, x)| *z *= *x);
                comp
            });
            self.bg.mult_fine(spectrum, fine)
        };
        (0..h.len())
            .map(|k| (-lam[k] * h.minus[k] - c.rho() * (mh.minus[k] + nv.minus[k])) / (1.0 + lam[k]))
            .collect()
    }

    /// `B^dagger w` with respect to `metric` on tangent vectors.
    fn constraint_adjoint(&self, metric: Metric, w: &[Complex64]) -> (Vec<f64>, ModeCoeffs) {
        let c = self.coupling;
        let spectrum = c.spectrum();
        let lam = spectrum.abs_lambda();
        let n = w.len();
        let mut wp = ModeCoeffs::zeros(n);
        for k in 0..n {
            wp.minus[k] = w[k] / (1.0 + lam[k]);
        }
        // spinor part: (D - rho M_u) w'
        let mw = self.bg.mult(spectrum, &wp);
        let mut hs = spectrum.apply_d(&wp);
        hs.axpy(-c.rho(), &mw);
        // scalar part: -rho I*(e^{Iu} Re<I psi, I w'>)
        let fw = Background::spinor_fine(spectrum, &wp);
        let dens: Vec<f64> = (0..fw[0].len())
            .map(|i| {
                (self.fine_psi[0][i].conj() * fw[0][i] + self.fine_psi[1][i].conj() * fw[1][i]).re
            })
            .collect();
        let vs: Vec<f64> = self.bg.restrict_weighted(&dens).iter().map(|x| -c.rho() * x).collect();
        (metric.riesz_u(c, &vs), Metric::riesz_psi(c, &hs))
    }

    fn tangent_norm_sq(&self, metric: Metric, v: &[f64], h: &ModeCoeffs) -> f64 {
        let spectrum = self.coupling.spectrum();
        metric.norm_sq_u(self.coupling, v) + spectrum.h_half_sq(h)
    }

    /// Least-squares multipliers `mu = (B B^+)^{-1} B grad J` and the
    /// projected gradient `grad J - B^+ mu`.
    pub fn project(&self, metric: Metric) -> Result<Projection> {
        let c = self.coupling;
        let n = self.grad_psi.len();
        let gu = metric.riesz_u(c, &self.grad_u);
        let gp = Metric::riesz_psi(c, &self.grad_psi);
        let rhs = pack(&self.constraint_derivative(&gu, &gp));
        let lam = c.spectrum().abs_lambda();
        let rho_e = c.rho() * self.bg.mean_exp_u();
        let precond = |r: &[f64]| {
            r.chunks_exact(2)
                .zip(lam)
                .flat_map(|(p, l)| {
                    let d = (l + rho_e).powi(2) / (1.0 + l).powi(3);
                    [p[0] / d, p[1] / d]
                })
                .collect()
        };
        let apply = |x: &[f64]| {
            let w = unpack(x);
            let (v, h) = self.constraint_adjoint(metric, &w);
            pack(&self.constraint_derivative(&v, &h))
        };
        let scale = linalg::norm(&rhs);
        let tol = 1e-13 * scale.max(1e-300);
        let (x, out) = if scale == 0.0 {
            (vec![0.0; 2 * n], linalg::KrylovOutcome { iterations: 0, residual: 0.0, converged: true })
        } else {
            linalg::cg(apply, precond, linalg::norm, &rhs, vec![0.0; 2 * n], tol, 4 * n)
        };
        if !out.converged && out.residual > 1e-8 * scale {
            let gap = c.spectrum().distance_to_spectrum(c.rho()).0;
            return Err(Error::Singular {
                what: "multiplier Gram system",
                detail: format!(
                    "CG stopped at relative residual {:.3e} after {} iterations; rho is {gap:.3e} from the spectrum",
                    out.residual / scale,
                    out.iterations
                ),
            });
        }
        let mu = unpack(&x);
        let (bu, bh) = self.constraint_adjoint(metric, &mu);
        let pu: Vec<f64> = gu.iter().zip(&bu).map(|(a, b)| a - b).collect();
        let mut ph = gp;
        ph.axpy(-1.0, &bh);
        let norm = self.tangent_norm_sq(metric, &pu, &ph).sqrt();
        Ok(Projection {
            mu,
            g_u: pu,
            g_psi: ph,
            norm,
        })
    }
}

pub(crate) struct Projection {
    pub mu: Vec<Complex64>,
    pub g_u: Vec<f64>,
    pub g_psi: ModeCoeffs,
    pub norm: f64,
}

/// Multipliers of the constraint at a certified point.
#[derive(Clone, Debug)]
pub struct MultiplierData {
    /// `mu_j` for `j = -1, -2, ...` in mode order.
    pub coefficients: Vec<Complex64>,
    /// `phi = sum_j mu_j phi_j`, a negative-mode spinor.
    pub phi: SpinorField,
    /// `||phi||_{H^{1/2}}`
    pub norm: f64,
}

fn linearize<'a>(coupling: &'a Coupling, point: &NehariPoint) -> Result<Linearization<'a>> {
    point.require_certified()?;
    coupling.check(point.u(), point.psi())?;
    coupling.spectrum().require_kernel_free()?;
    let a = coupling.spectrum().analyze(point.psi());
    Linearization::new(coupling, point.u(), &a)
}

pub fn multipliers(coupling: &Coupling, point: &NehariPoint) -> Result<MultiplierData> {
    let lin = linearize(coupling, point)?;
    let proj = lin.project(Metric::Sobolev)?;
    let spectrum = coupling.spectrum();
    let mut m = ModeCoeffs::zeros(proj.mu.len());
    m.minus.copy_from_slice(&proj.mu);
    let coefficients = (1..=spectrum.num_positive() as i64)
        .map(|j| proj.mu[spectrum.mode(-j).expect("mode in range").bin])
        .collect();
    Ok(MultiplierData {
        coefficients,
        norm: spectrum.h_half_sq(&m).sqrt(),
        phi: spectrum.synthesize(&m),
    })
}

/// Riesz representative of `d^N J` in `H^1 x H^{1/2}` and its norm.
pub fn constrained_gradient(
    coupling: &Coupling,
    point: &NehariPoint,
) -> Result<(ScalarField, SpinorField, f64)> {
    let lin = linearize(coupling, point)?;
    let proj = lin.project(Metric::Sobolev)?;
    let g = coupling.geometry().clone();
    Ok((
        ScalarField::new(g, proj.g_u)?,
        coupling.spectrum().synthesize(&proj.g_psi),
        proj.norm,
    ))
}

/// Norm of the unconstrained gradient in the same metric as
/// [`constrained_gradient`].
pub fn full_gradient_norm(coupling: &Coupling, point: &NehariPoint) -> Result<f64> {
    let lin = linearize(coupling, point)?;
    let gu = Metric::Sobolev.riesz_u(coupling, &lin.grad_u);
    let gp = Metric::riesz_psi(coupling, &lin.grad_psi);
    Ok((Metric::Sobolev.norm_sq_u(coupling, &gu) + coupling.spectrum().h_half_sq(&gp)).sqrt())
}

/// Integral identities satisfied by solutions, and the Jensen mean bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `int (e^{2u} + K - rho e^u |psi|^2)`
    pub d1: f64,
    /// `int (<D psi, psi> - rho e^u |psi|^2)`
    pub d2: f64,
    /// `e^{2 mean(u)}`
    pub jensen_lhs: f64,
    /// `(1/vol) int e^{2u}`
    pub jensen_rhs: f64,
    pub jensen_holds: bool,
}

pub fn ps_identities(coupling: &Coupling, point: &NehariPoint) -> Result<IdentityReport> {
    coupling.check(point.u(), point.psi())?;
    let bg = Background::new(point.u())?;
    let a = coupling.spectrum().analyze(point.psi());
    let e = evaluate_modes(coupling, point.u(), &a, &bg, false).breakdown;
    let vol = coupling.geometry().volume();
    let jensen_lhs = (2.0 * point.u().mean()).exp();
    let jensen_rhs = e.exp_term / vol;
    Ok(IdentityReport {
        d1: e.exp_term + coupling.curvature() * vol + 0.5 * e.coupling_term,
        d2: 0.5 * (e.dirac_term + e.coupling_term),
        jensen_lhs,
        jensen_rhs,
        jensen_holds: jensen_lhs <= jensen_rhs * (1.0 + 1e-14),
    })
}

/// Norms used for the scalar-spinor pair in this module's reports.
pub fn pair_norm(coupling: &Coupling, u: &ScalarField, psi: &SpinorField) -> Result<f64> {
    let hp = coupling.spectrum().h_half_norm(psi)?;
    let hu = h1_norm(u);
    Ok((hu * hu + hp * hp).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_geometry, eigendecompose};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(rho: f64) -> Coupling {
        let g = build_geometry(2.0 * PI, 2.0 * PI, 16, 16, (0.5, 0.0)).unwrap();
        Coupling::new(Arc::new(eigendecompose(&g)), rho).unwrap()
    }

    fn bumpy(c: &Coupling, amp: f64) -> ScalarField {
        ScalarField::from_fn(c.geometry().clone(), |x, y| amp * (x.cos() + 0.5 * (x + 2.0 * y).sin()))
            .unwrap()
    }

    #[test]
    fn trivial_point_is_certified() {
        let c = setup(0.25);
        let p = NehariPoint::trivial(&c);
        assert!(p.certified());
        let m = multipliers(&c, &p).unwrap();
        assert!(m.coefficients.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn fiber_with_zero_u_is_identity_on_positive_modes() {
        let c = setup(0.25);
        let g = c.geometry().clone();
        let plus = c.spectrum().eigenspinor(3).unwrap().scale(2.0);
        let p = project_to_fiber(&c, &ScalarField::zeros(g), &plus).unwrap();
        assert!((p.psi() - &plus).norm_l2() < 1e-14);
        assert!(p.certified());
    }

    #[test]
    fn fiber_projection_certifies() {
        for rho in [0.25, 0.809, 2.2] {
            let c = setup(rho);
            let u = bumpy(&c, 0.4);
            let plus = &c.spectrum().eigenspinor(1).unwrap() + &c.spectrum().eigenspinor(5).unwrap();
            let (p, stats) = project_to_fiber_with_stats(&c, &u, &plus).unwrap();
            assert!(p.certified(), "rho={rho} {stats:?}");
            let g = constraint_g(&c, &u, p.psi()).unwrap();
            assert!(c.spectrum().h_half_norm(&g).unwrap() < 1e-10);
        }
    }

    #[test]
    fn refuses_negative_input() {
        let c = setup(0.25);
        let u = ScalarField::zeros(c.geometry().clone());
        let minus = c.spectrum().eigenspinor(-2).unwrap();
        assert!(project_to_fiber(&c, &u, &minus).is_err());
    }

    #[test]
    fn hessian_block_is_negative() {
        let c = setup(0.809);
        let u = bumpy(&c, 0.7);
        let phi = &c.spectrum().eigenspinor(-1).unwrap() + &c.spectrum().eigenspinor(-9).unwrap().scale(0.3);
        assert!(constraint_hessian_form(&c, &u, &phi).unwrap() < 0.0);
    }

    #[test]
    fn generic_point_has_nonzero_multipliers() {
        let c = setup(0.25);
        let u = bumpy(&c, 0.3);
        let plus = c.spectrum().eigenspinor(2).unwrap().scale(1.5);
        let p = project_to_fiber(&c, &u, &plus).unwrap();
        let m = multipliers(&c, &p).unwrap();
        assert!(m.norm > 0.0 && m.norm.is_finite());
        let (_, _, n) = constrained_gradient(&c, &p).unwrap();
        assert!(n > 0.0 && n <= full_gradient_norm(&c, &p).unwrap() * (1.0 + 1e-12));
    }
}
