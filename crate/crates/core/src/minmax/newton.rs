//! Newton-Krylov polish of the full Euler-Lagrange system `(r_u, r_psi) = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::{evaluate_modes, residual_norm_modes, Background, Coupling};
use crate::error::{Error, Result};
use crate::linalg::{self, pack, unpack};
use crate::nehari::NehariPoint;
use crate::spectral::{laplacian, ModeCoeffs, ScalarField};

/// Target on `||r_u||_{L2} + ||r_psi||_{L2}`.
pub const NEWTON_TOL: f64 = 1e-11;
/// Largest admissible input residual.
pub const NEWTON_ENTRY: f64 = 1e-3;
const MAX_NEWTON: usize = 30;
const GMRES_RESTART: usize = 60;
const GMRES_CAP: usize = 1200;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct NewtonLog {
    /// Residual before each iteration and after the last one.
    pub residuals: Vec<f64>,
    pub krylov_iterations: Vec<usize>,
}

/// Unknowns packed as `[sqrt(cell) u, plus, minus]` so that the Euclidean
/// norm is the L2 norm.
struct Layout {
    n: usize,
    bins: usize,
    s: f64,
}

impl Layout {
    fn pack(&self, u: &[f64], a: &ModeCoeffs) -> Vec<f64> {
        let mut z: Vec<f64> = u.iter().map(|x| self.s * x).collect();
        z.extend(pack(&a.plus));
        z.extend(pack(&a.minus));
        z
    }

    fn unpack(&self, z: &[f64]) -> (Vec<f64>, ModeCoeffs) {
        let u = z[..self.n].iter().map(|x| x / self.s).collect();
        let plus = unpack(&z[self.n..self.n + 2 * self.bins]);
        let minus = unpack(&z[self.n + 2 * self.bins..]);
        (u, ModeCoeffs { plus, minus })
    }
}

struct State {
    u: ScalarField,
    a: ModeCoeffs,
    bg: Background,
    fine: [Vec<Complex64>; 2],
    /// Packed residual.
    f: Vec<f64>,
    /// `||r_u|| + ||r_psi||`
    residual: f64,
}

fn state(c: &Coupling, layout: &Layout, u: Vec<f64>, a: ModeCoeffs) -> Result<State> {
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Newton iterate"));
    }
    let u = ScalarField::from_raw(c.geometry().clone(), u);
    let bg = Background::new(&u)?;
    let ev = evaluate_modes(c, &u, &a, &bg, true);
    let residual = residual_norm_modes(c, &ev);
    if !residual.is_finite() {
        return Err(Error::NonFinite("Newton residual"));
    }
    let f = layout.pack(&ev.r_u, &ev.r_psi);
    let fine = Background::spinor_fine(c.spectrum(), &a);
    Ok(State { u, a, bg, fine, f, residual })
}

/// Exact Jacobian of `(r_u, r_psi)` at `st`, in packed coordinates.
fn jacobian_apply(c: &Coupling, layout: &Layout, st: &State, z: &[f64]) -> Vec<f64> {
    let g = c.geometry();
    let spectrum = c.spectrum();
    let rho = c.rho();
    let (v, h) = layout.unpack(z);
    let iv = g.prolong_scalar(&v);
    let fh = Background::spinor_fine(spectrum, &h);
    let e = st.bg.exp_u();
    let w: Vec<f64> = (0..iv.len())
        .map(|i| {
            let dens = st.fine[0][i].norm_sqr() + st.fine[1][i].norm_sqr();
            let cross = (st.fine[0][i].conj() * fh[0][i] + st.fine[1][i].conj() * fh[1][i]).re;
            -2.0 * e[i] * iv[i] + rho * (iv[i] * dens + 2.0 * cross)
        })
        .collect();
    let lap = laplacian(&ScalarField::from_raw(g.clone(), v));
    let du: Vec<f64> = lap.values().iter().zip(st.bg.restrict_weighted(&w)).map(|(l, x)| l + x).collect();
    let mut dpsi = spectrum.apply_d(&h);
    dpsi.axpy(-rho, &st.bg.mult(spectrum, &h));
    let scaled = st.fine.clone().map(|mut comp| {
        comp.iter_mut().zip(&iv).for_each(|(z, x)| *z *= *x);
        comp
    });
    dpsi.axpy(-rho, &st.bg.mult_fine(spectrum, scaled));
    layout.pack(&du, &dpsi)
}

fn preconditioner(c: &Coupling, layout: &Layout, st: &State) -> impl Fn(&[f64]) -> Vec<f64> {
    let g = c.geometry().clone();
    let lam = c.spectrum().abs_lambda().to_vec();
    let e = st.bg.exp_u();
    let mean_e = e.iter().sum::<f64>() / e.len() as f64;
    let mean_e2 = e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64;
    let rho_e = c.rho() * mean_e;
    let (n, bins) = (layout.n, layout.bins);
    let safe = |d: f64, l: f64| {
        let floor = 0.1 * (1.0 + l);
        if d.abs() < floor {
            floor.copysign(d)
        } else {
            d
        }
    };
    let dp: Vec<f64> = lam.iter().map(|&l| safe(l - rho_e, l)).collect();
    let dm: Vec<f64> = lam.iter().map(|&l| safe(-l - rho_e, l)).collect();
    move |r: &[f64]| {
        let mut cu = g.coarse.forward_real(&r[..n]);
        for (k, z) in cu.iter_mut().enumerate() {
            *z /= -(g.scalar_wavenumber_sq(k) + 2.0 * mean_e2);
        }
        let mut out = g.coarse.inverse_real(&cu);
        for k in 0..bins {
            let i = n + 2 * k;
            out.push(r[i] / dp[k]);
            out.push(r[i + 1] / dp[k]);
        }
        for k in 0..bins {
            let i = n + 2 * bins + 2 * k;
            out.push(r[i] / dm[k]);
            out.push(r[i + 1] / dm[k]);
        }
        out
    }
}

/// Newton iteration on the coupled Euler-Lagrange system with the exact
/// Jacobian, solved by right-preconditioned GMRES with backtracking on the
/// residual norm. Returns the input unchanged if it already meets
/// [`NEWTON_TOL`].
/// The input need not be certified on `N`; the output is.
pub fn newton_polish(coupling: &Coupling, point: &NehariPoint) -> Result<NehariPoint> {
    newton_polish_logged(coupling, point).map(|(p, _)| p)
}

pub fn newton_polish_logged(coupling: &Coupling, point: &NehariPoint) -> Result<(NehariPoint, NewtonLog)> {
    coupling.check(point.u(), point.psi())?;
    coupling.spectrum().require_kernel_free()?;
    let a = coupling.spectrum().analyze(point.psi());
    polish_modes(coupling, point.u().values().to_vec(), a)
}

pub(crate) fn polish_modes(c: &Coupling, u: Vec<f64>, a: ModeCoeffs) -> Result<(NehariPoint, NewtonLog)> {
    let g = c.geometry();
    let layout = Layout {
        n: g.len(),
        bins: a.len(),
        s: g.cell_area().sqrt(),
    };
    let mut st = state(c, &layout, u, a)?;
    let mut log = NewtonLog::default();
    if st.residual > NEWTON_ENTRY {
        return Err(Error::InvalidArgument(format!(
            "Newton polish needs residual below {NEWTON_ENTRY:e}, got {:.3e}",
            st.residual
        )));
    }
    log.residuals.push(st.residual);
    while st.residual >= NEWTON_TOL {
        if log.krylov_iterations.len() >= MAX_NEWTON {
            return Err(Error::NotConverged {
                solver: "Newton polish",
                iterations: MAX_NEWTON,
                residual: st.residual,
                detail: format!("residual history {:?}", log.residuals),
            });
        }
        let fnorm = linalg::norm(&st.f);
        let forcing = fnorm.min(1e-2);
        let b: Vec<f64> = st.f.iter().map(|x| -x).collect();
        let precond = preconditioner(c, &layout, &st);
        let (d, out) = {
            let st = &st;
            let layout = &layout;
            linalg::gmres(
                |z| jacobian_apply(c, layout, st, z),
                &precond,
                &b,
                (forcing * fnorm).max(1e-15),
                GMRES_RESTART,
                GMRES_CAP,
            )
        };
        log.krylov_iterations.push(out.iterations);
        if !(out.residual < fnorm) {
            let gap = c.spectrum().distance_to_spectrum(c.rho()).0;
            return Err(Error::Singular {
                what: "Newton Jacobian",
                detail: format!(
                    "GMRES could not reduce the residual {fnorm:.3e}; rho is {gap:.3e} from the spectrum"
                ),
            });
        }
        let z0 = layout.pack(st.u.values(), &st.a);
        let mut t = 1.0;
        loop {
            let z: Vec<f64> = z0.iter().zip(&d).map(|(x, y)| x + t * y).collect();
            let (u, a) = layout.unpack(&z);
            match state(c, &layout, u, a) {
                Ok(next) if linalg::norm(&next.f) < (1.0 - 1e-4 * t) * fnorm => {
                    st = next;
                    break;
                }
                Ok(_) => {}
                Err(Error::Overflow { .. } | Error::NonFinite(_)) => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
            if t < 1e-4 {
                return Err(Error::NotConverged {
                    solver: "Newton polish",
                    iterations: log.krylov_iterations.len(),
                    residual: st.residual,
                    detail: "backtracking failed to reduce the residual".into(),
                });
            }
        }
        log.residuals.push(st.residual);
    }
    let point = NehariPoint::from_modes(c, st.u.clone(), &st.a, &st.bg)?;
    Ok((point, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::residual_norm;
    use crate::spectral::{build_geometry, eigendecompose, SpinorField};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(rho: f64) -> Coupling {
        let g = build_geometry(2.0 * PI, 2.0 * PI, 16, 16, (0.5, 0.0)).unwrap();
        Coupling::new(Arc::new(eigendecompose(&g)), rho).unwrap()
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let c = setup(0.809);
        let g = c.geometry().clone();
        let layout = Layout { n: g.len(), bins: g.len(), s: g.cell_area().sqrt() };
        let u: Vec<f64> = (0..g.len()).map(|i| 0.2 * (g.grid_point(i)[0]).sin() + 0.1).collect();
        let mut a = c.spectrum().analyze(&c.spectrum().eigenspinor(2).unwrap().scale(1.3));
        a.minus[5] = Complex64::new(0.2, -0.1);
        let st = state(&c, &layout, u.clone(), a.clone()).unwrap();
        let z0 = layout.pack(&u, &a);
        let dir: Vec<f64> = (0..z0.len()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let jd = jacobian_apply(&c, &layout, &st, &dir);
        let h = 1e-6;
        let shifted = |t: f64| {
            let z: Vec<f64> = z0.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let (u, a) = layout.unpack(&z);
            state(&c, &layout, u, a).unwrap().f
        };
        let (fp, fm) = (shifted(h), shifted(-h));
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let err: f64 = fd.iter().zip(&jd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-6 * linalg::norm(&jd), "{err}");
    }

    #[test]
    fn exact_solution_is_returned_unchanged() {
        let c = setup(0.25);
        let g = c.geometry().clone();
        let (u, psi) = (ScalarField::zeros(g.clone()), SpinorField::zeros(g));
        let p = newton_polish(&c, &NehariPoint::trivial(&c)).unwrap();
        assert_eq!(p.u().values(), u.values());
        assert_eq!(p.psi().values(), psi.values());
    }

    #[test]
    fn perturbed_trivial_solution_returns_to_it() {
        let c = setup(0.25);
        let g = c.geometry().clone();
        let u = ScalarField::from_fn(g.clone(), |x, y| 1e-5 * (x.cos() + (x - y).sin())).unwrap();
        let psi = c.spectrum().eigenspinor(3).unwrap().scale(1e-5);
        let start = NehariPoint::new(&c, u, psi).unwrap();
        let (p, log) = newton_polish_logged(&c, &start).unwrap();
        assert!(residual_norm(&c, p.u(), p.psi()).unwrap() < NEWTON_TOL);
        assert!(p.u().norm_l2() < 1e-12 && p.psi().norm_l2() < 1e-12, "{log:?}");
    }
}
