//! Random band-limited fields for probes and sampled bounds.

use num_complex::Complex64;
use rand::Rng;

use crate::spectral::{DiracSpectrum, TorusGeometry};

/// Real field with independent uniform Fourier coefficients on
/// `|m_1|, |m_2| <= band`; the mean mode is included only if `with_mean`.
pub(crate) fn band_scalar(g: &TorusGeometry, rng: &mut impl Rng, band: i64, with_mean: bool) -> Vec<f64> {
    let n = g.len();
    let [n1, n2] = g.resolution();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let [m1, m2] = g.signed_mode(k);
        if m1.abs() > band || m2.abs() > band || (m1 == 0 && m2 == 0 && !with_mean) {
            continue;
        }
        let kk = ((-m1).rem_euclid(n1 as i64) as usize) * n2 + (-m2).rem_euclid(n2 as i64) as usize;
        if kk < k {
            continue;
        }
        let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if kk == k {
            c[k] += z.re;
        } else {
            c[k] += z;
            c[kk] += z.conj();
        }
    }
    g.coarse.inverse_real(&c)
}

/// Positive-mode coefficients, uniform in the unit square, on the bins with
/// `0 < |lambda| <= max_lambda`.
pub(crate) fn band_plus(spectrum: &DiracSpectrum, rng: &mut impl Rng, max_lambda: f64) -> Vec<Complex64> {
    spectrum
        .abs_lambda()
        .iter()
        .map(|&l| {
            if l > 0.0 && l <= max_lambda {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}
