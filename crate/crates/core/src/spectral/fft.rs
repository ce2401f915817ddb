//! Two-dimensional complex FFT on row-major `n1 x n2` grids.
//!
//! Forward transforms are normalized so that `f(x) = sum_k c_k exp(i k.x)`,
//! i.e. the zero coefficient is the grid mean.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    n1: usize,
    n2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fft2({}x{})", self.n1, self.n2)
    }
}

impl Fft2 {
    pub fn new(n1: usize, n2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n1,
            n2,
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
        }
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    fn run(&self, data: &mut [Complex64], along1: &Arc<dyn Fft<f64>>, along2: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.len());
        // rows are contiguous (length n2)
        along2.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); self.n1];
        for i2 in 0..self.n2 {
            for i1 in 0..self.n1 {
                col[i1] = data[i1 * self.n2 + i2];
            }
            along1.process(&mut col);
            for i1 in 0..self.n1 {
                data[i1 * self.n2 + i2] = col[i1];
            }
        }
    }

    /// Grid values -> normalized Fourier coefficients, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd1, &self.fwd2);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Normalized Fourier coefficients -> grid values, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv1, &self.inv2);
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

/// Signed frequency of FFT bin `k` on an even grid of size `n`: `[-n/2, n/2)`.
pub(crate) fn signed_frequency(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}
