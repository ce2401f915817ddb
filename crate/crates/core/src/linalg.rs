//! Matrix-free Krylov solvers on flat real vectors.

use num_complex::Complex64;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(a, b)| *a += alpha * b);
}

/// Complex slice -> interleaved `(re, im)` reals.
pub(crate) fn pack(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub(crate) fn unpack(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct KrylovOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// `apply`. `measure` maps a residual vector to the norm compared with `tol`.
pub(crate) fn cg(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    measure: impl Fn(&[f64]) -> f64,
    b: &[f64],
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, KrylovOutcome) {
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut res = measure(&r);
    if res <= tol {
        return (x, KrylovOutcome { iterations: 0, residual: res, converged: true });
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return (x, KrylovOutcome { iterations: it, residual: res, converged: false });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        res = measure(&r);
        if res <= tol {
            return (x, KrylovOutcome { iterations: it, residual: res, converged: true });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    (x, KrylovOutcome { iterations: max_iter, residual: res, converged: false })
}

/// Restarted GMRES with right preconditioning, started from zero. Stops when
/// the Euclidean residual drops below `tol`.
pub(crate) fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, KrylovOutcome) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut beta = norm(&r);
    let mut total = 0;
    while total < max_iter {
        if beta <= tol {
            return (x, KrylovOutcome { iterations: total, residual: beta, converged: true });
        }
        let m = restart.min(max_iter - total);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            // modified Gram-Schmidt, applied twice for stability
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    h[i][k] += c;
                    axpy(&mut w, -c, vi);
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            axpy(&mut x, *yi, zi);
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let new_beta = norm(&r);
        if k_used == 0 || new_beta >= beta {
            return (x, KrylovOutcome { iterations: total, residual: new_beta, converged: new_beta <= tol });
        }
        beta = new_beta;
    }
    (x, KrylovOutcome { iterations: total, residual: beta, converged: beta <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[f64], shift: f64) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = (2.0 + shift) * x[i];
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < n {
                    s -= x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn cg_solves_spd_system() {
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let (x, out) = cg(|x| tridiag(x, 0.1), |r| r.to_vec(), norm, &b, vec![0.0; 50], 1e-12, 500);
        assert!(out.converged);
        let r: Vec<f64> = tridiag(&x, 0.1).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&r) < 1e-11);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 40;
        let op = |x: &[f64]| {
            let mut y = tridiag(x, 0.5);
            for i in 1..n {
                y[i] += 0.3 * x[i - 1];
            }
            y
        };
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).cos()).collect();
        let (x, out) = gmres(op, |r| r.to_vec(), &b, 1e-11, 25, 400);
        assert!(out.converged, "{out:?}");
        let r: Vec<f64> = op(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&r) < 1e-10);
    }
}
