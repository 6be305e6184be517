//! Thin FFT layer shared by the spectral paths.
//!
//! Coefficients here are in FFT storage order (`m < n/2` is wavenumber `m`,
//! the rest is `m - n`) and normalized so that `c_k = (1/n) sum_i f_i
//! e^{-2 pi i k i / n}`. The grid offset `x_0 = -pi` only contributes the
//! phase `(-1)^k`, which every Fourier multiplier commutes with, so it is
//! applied in [`crate::grid::dft`] alone.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Signed wavenumber of FFT slot `m` on an `n`-point grid. Slot `n/2` is the
/// Nyquist mode and maps to `-n/2`.
#[inline]
pub fn wavenumber(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Normalized forward transform of real samples.
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, false).process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse of [`forward`], keeping the real part.
pub fn inverse_real(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    plan(buf.len(), true).process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Multiplies every mode by `symbol(k)` and returns to physical space.
pub fn apply_multiplier(values: &[f64], symbol: impl Fn(i64) -> Complex64) -> Vec<f64> {
    let n = values.len();
    let mut c = forward(values);
    for (m, cm) in c.iter_mut().enumerate() {
        *cm *= symbol(wavenumber(m, n));
    }
    inverse_real(&c)
}

/// Zeroes the Nyquist slot, projecting onto the modes `|k| < n/2`.
pub fn drop_nyquist(coeffs: &mut [Complex64]) {
    let n = coeffs.len();
    coeffs[n / 2] = Complex64::new(0.0, 0.0);
}

/// Alias-free products of band-limited fields.
///
/// Inputs are coefficient vectors on an `n`-grid with the Nyquist slot
/// already cleared. They are zero-padded to `2n` points, multiplied in
/// physical space, and truncated back to `|k| < n/2`. Any padding of at
/// least `3n/2` is exact for such products; `2n` keeps the sizes powers of
/// two whenever `n` is.
#[derive(Debug)]
pub struct Dealiaser {
    n: usize,
    padded: usize,
}

impl Dealiaser {
    pub fn new(n: usize) -> Self {
        Self { n, padded: 2 * n }
    }

    /// Pads `coeffs` and returns physical samples on the fine grid.
    pub fn to_fine(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let (n, big) = (self.n, self.padded);
        let mut buf = vec![Complex64::new(0.0, 0.0); big];
        for (m, &c) in coeffs.iter().enumerate() {
            if m == n / 2 {
                continue;
            }
            let k = wavenumber(m, n);
            let slot = if k >= 0 { k as usize } else { (big as i64 + k) as usize };
            buf[slot] = c;
        }
        plan(big, true).process(&mut buf);
        buf
    }

    /// Transforms fine-grid samples back and truncates to the coarse band.
    pub fn to_coarse(&self, mut fine: Vec<Complex64>) -> Vec<Complex64> {
        let (n, big) = (self.n, self.padded);
        plan(big, false).process(&mut fine);
        let scale = 1.0 / big as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (m, slot) in out.iter_mut().enumerate() {
            if m == n / 2 {
                continue;
            }
            let k = wavenumber(m, n);
            let src = if k >= 0 { k as usize } else { (big as i64 + k) as usize };
            *slot = fine[src] * scale;
        }
        out
    }

    /// `P(a b)` for coefficient vectors `a`, `b`.
    #[cfg(test)]
    pub fn product(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let fa = self.to_fine(a);
        let fb = self.to_fine(b);
        let prod = fa
            .iter()
            .zip(&fb)
            .map(|(x, y)| Complex64::new(x.re * y.re, 0.0))
            .collect();
        self.to_coarse(prod)
    }
}
