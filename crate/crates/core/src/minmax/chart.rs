//! Chart coordinates `(u, psi^+)` on the Nehari manifold. The negative part
//! of the spinor is always the fiber completion, so every chart point lies on
//! `N` and the chart gradient of `J` is the partial gradient in `(u, psi^+)`.

use std::cell::{Cell, RefCell};

use num_complex::Complex64;

use super::TraceRecord;
use crate::energy::{evaluate_modes, residual_norm_modes, Background, Coupling, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::nehari::{solve_fiber, Metric, NehariPoint};
use crate::spectral::{ModeCoeffs, ScalarField};

/// A point or tangent vector in chart coordinates.
#[derive(Clone, Debug)]
pub(crate) struct Coords {
    pub u: Vec<f64>,
    pub plus: Vec<Complex64>,
}

impl Coords {
    pub fn zeros(n_u: usize, n_bins: usize) -> Self {
        Coords {
            u: vec![0.0; n_u],
            plus: vec![Complex64::new(0.0, 0.0); n_bins],
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Coords) {
        self.u.iter_mut().zip(&other.u).for_each(|(a, b)| *a += alpha * b);
        self.plus.iter_mut().zip(&other.plus).for_each(|(a, b)| *a += alpha * b);
    }

    pub fn scaled(&self, alpha: f64) -> Coords {
        Coords {
            u: self.u.iter().map(|x| alpha * x).collect(),
            plus: self.plus.iter().map(|z| alpha * z).collect(),
        }
    }

    pub fn sub(&self, other: &Coords) -> Coords {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `(1 - t) a + t b`
    pub fn lerp(a: &Coords, b: &Coords, t: f64) -> Coords {
        let mut out = a.scaled(1.0 - t);
        out.axpy(t, b);
        out
    }
}

/// A fully evaluated chart point.
#[derive(Clone, Debug)]
pub(crate) struct ChartPoint {
    pub x: Coords,
    /// Fiber completion of `x.plus` at `x.u`.
    pub minus: Vec<Complex64>,
    pub energy: EnergyBreakdown,
    /// Riesz representative of the chart differential in the solver metric.
    pub grad: Coords,
    pub grad_norm: f64,
    /// `||r_u||_{L2} + ||r_psi||_{L2}`
    pub residual: f64,
}

impl ChartPoint {
    pub fn j(&self) -> f64 {
        self.energy.j
    }

    pub fn modes(&self) -> ModeCoeffs {
        ModeCoeffs {
            plus: self.x.plus.clone(),
            minus: self.minus.clone(),
        }
    }
}

/// Errors after which a trial step is shrunk rather than aborting the run.
pub(crate) fn recoverable(e: &Error) -> bool {
    matches!(e, Error::Overflow { .. } | Error::NotConverged { .. } | Error::NonFinite(_))
}

pub(crate) struct Chart<'a> {
    pub coupling: &'a Coupling,
    trace_energy: bool,
    phase: Cell<&'static str>,
    step: Cell<usize>,
    evaluations: Cell<usize>,
    records: RefCell<Vec<TraceRecord>>,
}

impl<'a> Chart<'a> {
    pub fn new(coupling: &'a Coupling, trace_energy: bool) -> Self {
        Chart {
            coupling,
            trace_energy,
            phase: Cell::new("start"),
            step: Cell::new(0),
            evaluations: Cell::new(0),
            records: RefCell::new(Vec::new()),
        }
    }

    pub fn set_phase(&self, phase: &'static str, step: usize) {
        self.phase.set(phase);
        self.step.set(step);
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.get()
    }

    pub fn record(&self, node: Option<usize>, p: &ChartPoint) {
        self.records.borrow_mut().push(TraceRecord {
            phase: self.phase.get(),
            step: self.step.get(),
            node,
            energy: p.energy,
            residual: Some(p.residual),
            grad_norm: Some(p.grad_norm),
        });
    }

    pub fn take_records(&self) -> Vec<TraceRecord> {
        self.records.take()
    }

    fn n_bins(&self) -> usize {
        self.coupling.spectrum().abs_lambda().len()
    }

    pub fn zeros(&self) -> Coords {
        Coords::zeros(self.coupling.geometry().len(), self.n_bins())
    }

    /// Solver-metric inner product: `int uv + grad u . grad v` plus the
    /// H^{1/2} product on the positive modes.
    pub fn inner(&self, a: &Coords, b: &Coords) -> f64 {
        let su = Metric::Solver.inner_u(self.coupling, &a.u, &b.u);
        let lam = self.coupling.spectrum().abs_lambda();
        let sp: f64 = (0..a.plus.len()).map(|k| (1.0 + lam[k]) * (a.plus[k].conj() * b.plus[k]).re).sum();
        su + sp
    }

    pub fn norm(&self, a: &Coords) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    pub fn eval(&self, x: &Coords, warm: Option<&[Complex64]>) -> Result<ChartPoint> {
        let c = self.coupling;
        if x.u.iter().any(|v| !v.is_finite()) || x.plus.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("chart coordinates"));
        }
        let g = c.geometry();
        let u = ScalarField::from_raw(g.clone(), x.u.clone());
        let bg = Background::new(&u)?;
        let plus = ModeCoeffs {
            plus: x.plus.clone(),
            minus: vec![Complex64::new(0.0, 0.0); x.plus.len()],
        };
        let (a, _) = solve_fiber(c, &bg, &plus, warm)?;
        let ev = evaluate_modes(c, &u, &a, &bg, true);
        if !ev.breakdown.j.is_finite() {
            return Err(Error::NonFinite("chart energy"));
        }
        let residual = residual_norm_modes(c, &ev);

        let grad_u: Vec<f64> = ev.r_u.iter().map(|r| -2.0 * r).collect();
        let lam = c.spectrum().abs_lambda();
        let grad = Coords {
            u: Metric::Solver.riesz_u(c, &grad_u),
            plus: (0..lam.len()).map(|k| 4.0 * ev.r_psi.plus[k] / (1.0 + lam[k])).collect(),
        };
        let grad_norm = self.norm(&grad);
        self.evaluations.set(self.evaluations.get() + 1);
        let p = ChartPoint {
            x: x.clone(),
            minus: a.minus,
            energy: ev.breakdown,
            grad,
            grad_norm,
            residual,
        };
        if self.trace_energy {
            self.record(None, &p);
        }
        Ok(p)
    }

    pub fn to_point(&self, p: &ChartPoint) -> Result<NehariPoint> {
        let g = self.coupling.geometry();
        let u = ScalarField::from_raw(g.clone(), p.x.u.clone());
        let bg = Background::new(&u)?;
        NehariPoint::from_modes(self.coupling, u, &p.modes(), &bg)
    }

    pub fn coords_of(&self, point: &NehariPoint) -> (Coords, Vec<Complex64>) {
        let a = self.coupling.spectrum().analyze(point.psi());
        (
            Coords {
                u: point.u().values().to_vec(),
                plus: a.plus,
            },
            a.minus,
        )
    }

    /// Coordinates of `(ubar, s phi_j)` for positive mode `j`.
    pub fn constant_mode(&self, ubar: f64, j: i64, s: Complex64) -> Result<Coords> {
        let mode = self.coupling.spectrum().mode(j)?;
        let mut x = self.zeros();
        x.u.iter_mut().for_each(|v| *v = ubar);
        x.plus[mode.bin] = s;
        Ok(x)
    }

    /// Orthonormalize in place by modified Gram-Schmidt, dropping vectors
    /// whose remainder is below `drop_tol` relative to their input norm.
    pub fn orthonormalize(&self, vs: Vec<Coords>, drop_tol: f64) -> Vec<Coords> {
        let mut out: Vec<Coords> = Vec::with_capacity(vs.len());
        for mut v in vs {
            let n0 = self.norm(&v);
            if n0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for q in &out {
                    let c = self.inner(q, &v);
                    v.axpy(-c, q);
                }
            }
            let n = self.norm(&v);
            if n > drop_tol * n0 {
                out.push(v.scaled(1.0 / n));
            }
        }
        out
    }

    /// `v - sum <q, v> q` over an orthonormal set.
    pub fn project_out(&self, v: &Coords, basis: &[Coords]) -> Coords {
        let mut out = v.clone();
        for q in basis {
            let c = self.inner(q, &out);
            out.axpy(-c, q);
        }
        out
    }
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

    #[test]
    fn chart_gradient_matches_finite_differences() {
        let c = setup(0.809);
        let chart = Chart::new(&c, false);
        let g = c.geometry().clone();
        let mut x = chart.constant_mode(0.2, 1, Complex64::new(1.5, 0.3)).unwrap();
        x.plus[c.spectrum().mode(4).unwrap().bin] = Complex64::new(-0.4, 0.7);
        for (i, v) in x.u.iter_mut().enumerate() {
            let [p, q] = g.grid_point(i);
            *v += 0.3 * p.cos() * (2.0 * q).sin();
        }
        let p = chart.eval(&x, None).unwrap();
        let mut dir = chart.zeros();
        for (i, v) in dir.u.iter_mut().enumerate() {
            let [p, q] = g.grid_point(i);
            *v = (p + q).sin() + 0.2;
        }
        dir.plus[c.spectrum().mode(2).unwrap().bin] = Complex64::new(0.3, -1.0);
        dir.plus[c.spectrum().mode(7).unwrap().bin] = Complex64::new(0.5, 0.5);
        let h = 1e-5;
        let mut xp = x.clone();
        xp.axpy(h, &dir);
        let mut xm = x.clone();
        xm.axpy(-h, &dir);
        let fd = (chart.eval(&xp, None).unwrap().j() - chart.eval(&xm, None).unwrap().j()) / (2.0 * h);
        let an = chart.inner(&p.grad, &dir);
        assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "fd {fd} vs {an}");
    }
}
