//! The constant-curvature conformal factor: `Delta u = e^{2u} + K`.

use crate::energy::Background;
use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::{laplacian, ScalarField, TorusGeometry};

const MAX_NEWTON: usize = 50;
const TOL: f64 = 1e-12;

/// Solve `Delta u = e^{2u} + K` for a curvature field `K` with negative total
/// curvature, with the same dealiased exponential as the energy. `K = -1`
/// gives `u = 0` and constant `K = -c` gives `u = log(c)/2` exactly.
pub fn uniformize(geometry: &TorusGeometry, k: &ScalarField) -> Result<ScalarField> {
    k.check_geometry(geometry)?;
    let total = k.integral();
    if !(total < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "uniformization needs negative total curvature, got {total:.6e}"
        )));
    }
    let g = k.geometry().clone();
    let n = g.len();
    let s = g.cell_area().sqrt();
    let kv = k.values();
    let mut u = ScalarField::constant(g.clone(), 0.5 * (-k.mean()).ln());
    let residual = |u: &ScalarField| -> Result<(Vec<f64>, Background, f64)> {
        let bg = Background::new(u)?;
        let lap = laplacian(u);
        let e2 = bg.exp2_restricted();
        let r: Vec<f64> = (0..n).map(|i| lap.values()[i] - e2[i] - kv[i]).collect();
        let norm = s * linalg::norm(&r);
        Ok((r, bg, norm))
    };
    let (mut r, mut bg, mut norm) = residual(&u)?;
    for _ in 0..MAX_NEWTON {
        if norm < TOL {
            return Ok(u);
        }
        // J v = Delta v - I*(2 e^{2Iu} Iv); -J is symmetric positive definite
        let e = bg.exp_u().to_vec();
        let mean_e2 = e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64;
        let apply = |v: &[f64]| {
            let iv = g.prolong_scalar(v);
            let w: Vec<f64> = iv.iter().zip(&e).map(|(x, e)| 2.0 * e * x).collect();
            let lap = laplacian(&ScalarField::from_raw(g.clone(), v.to_vec()));
            let ew = bg.restrict_weighted(&w);
            lap.values().iter().zip(&ew).map(|(l, x)| x - l).collect::<Vec<f64>>()
        };
        let precond = |r: &[f64]| {
            let mut c = g.coarse.forward_real(r);
            for (k, z) in c.iter_mut().enumerate() {
                *z /= g.scalar_wavenumber_sq(k) + 2.0 * mean_e2;
            }
            g.coarse.inverse_real(&c)
        };
        let measure = |r: &[f64]| s * linalg::norm(r);
        let (dv, _) = linalg::cg(apply, precond, measure, &r, vec![0.0; n], 1e-3 * TOL.max(1e-2 * norm * norm), 4 * n);
        let mut t = 1.0;
        loop {
            let trial = ScalarField::from_raw(g.clone(), u.values().iter().zip(&dv).map(|(a, b)| a + t * b).collect());
            match residual(&trial) {
                Ok((r2, bg2, n2)) if n2 < norm || n2 < TOL => {
                    (u, r, bg, norm) = (trial, r2, bg2, n2);
                    break;
                }
                Ok(_) | Err(Error::Overflow { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
            if t < 1e-6 {
                return Err(Error::NotConverged {
                    solver: "uniformization",
                    iterations: MAX_NEWTON,
                    residual: norm,
                    detail: "line search stalled".into(),
                });
            }
        }
    }
    if norm < TOL {
        return Ok(u);
    }
    Err(Error::NotConverged {
        solver: "uniformization",
        iterations: MAX_NEWTON,
        residual: norm,
        detail: format!("residual above {TOL:e} after {MAX_NEWTON} Newton steps"),
    })
}
