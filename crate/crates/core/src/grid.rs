//! Periodic grid on `[-pi, pi)`, nodal fields, and the discrete Fourier
//! bridge every spectral path goes through.
//!
//! One transform convention is used throughout the crate:
//!
//! ```text
//! u_hat(k) = (1/n) sum_i u(x_i) exp(-i k x_i),   k = -n/2 .. n/2-1
//! ```
//!
//! so `u_hat(k)` approximates the Fourier coefficient
//! `(1/2pi) int u(x) exp(-ikx) dx` of the 2pi-periodic function.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NlbError, Result};
use crate::fourier;

/// Uniform mesh of the torus with `n` nodes `x_i = -pi + i * delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    mesh: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(NlbError::InvalidGridSize(n));
        }
        Ok(Self {
            n,
            mesh: 2.0 * PI / n as f64,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh size `delta = 2 pi / n`.
    #[inline]
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        -PI + i as f64 * self.mesh
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Wavenumbers in storage order of [`Spectrum::coeffs`].
    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> {
        let half = (self.n / 2) as i64;
        -half..half
    }
}

/// Builds the grid with `n` nodes; `n` must be even and at least 4.
pub fn make_grid(n: usize) -> Result<Grid> {
    Grid::new(n)
}

/// Nodal values of a periodic function at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(NlbError::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(NlbError::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, (0..grid.n()).map(|i| f(grid.node(i))).collect())
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n()],
        }
    }

    /// Wraps values that are finite by construction.
    pub(crate) fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Discrete spatial mean `(1/n) sum_i f_i`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Grid-aligned translation: `out_i = f_{(i + s) mod n}`.
    pub fn shifted(&self, s: usize) -> Self {
        let n = self.len();
        let values = (0..n).map(|i| self.values[(i + s) % n]).collect();
        Self::from_values(self.grid, values)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_values(self.grid, self.values.iter().map(|v| a * v).collect())
    }

    pub(crate) fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(NlbError::GridMismatch {
                left: self.grid.n(),
                right: other.grid.n(),
            });
        }
        Ok(())
    }
}

/// Fourier coefficients `u_hat(k)` for `k = -n/2 .. n/2-1`, stored in that
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n() {
            return Err(NlbError::LengthMismatch {
                expected: grid.n(),
                got: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of wavenumber `k`; panics outside `-n/2 .. n/2-1`.
    pub fn get(&self, k: i64) -> Complex64 {
        let half = (self.grid.n() / 2) as i64;
        assert!((-half..half).contains(&k), "wavenumber {k} out of range");
        self.coeffs[(k + half) as usize]
    }

    /// `(k, u_hat(k))` pairs in ascending `k`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.grid.wavenumbers().zip(self.coeffs.iter().copied())
    }

    /// `(k, |u_hat(k)|)` pairs in ascending `k`.
    pub fn moduli(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.iter().map(|(k, c)| (k, c.norm()))
    }
}

#[inline]
fn grid_phase(k: i64) -> f64 {
    // exp(-i k x_0) with x_0 = -pi
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Forward transform under the crate-wide convention.
pub fn dft(f: &Field) -> Spectrum {
    let grid = f.grid();
    let n = grid.n();
    let raw = fourier::forward(f.values());
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (m, c) in raw.into_iter().enumerate() {
        let k = fourier::wavenumber(m, n);
        coeffs[(k + (n / 2) as i64) as usize] = c * grid_phase(k);
    }
    Spectrum { grid, coeffs }
}

/// Inverse transform; the imaginary residue of a non-symmetric spectrum is
/// discarded.
pub fn idft(s: &Spectrum) -> Field {
    let n = s.grid.n();
    let mut raw = vec![Complex64::new(0.0, 0.0); n];
    for (k, c) in s.iter() {
        let m = k.rem_euclid(n as i64) as usize;
        raw[m] = c * grid_phase(k);
    }
    let values = fourier::inverse_real(&raw);
    Field::from_values(s.grid, values)
}

/// Rectangle-rule `L^p` norm `(delta sum |f_i|^p)^(1/p)`; `p = inf` gives the
/// nodal maximum.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(NlbError::InvalidParameter(format!(
            "L^p exponent must lie in [1, inf], got {p}"
        )));
    }
    if p.is_infinite() {
        return Ok(f.values().iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    let delta = f.grid().mesh();
    let sum: f64 = if p == 2.0 {
        f.values().iter().map(|v| v * v).sum()
    } else {
        f.values().iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((delta * sum).powf(1.0 / p))
}

/// Nodal minimum, maximum and amplitude `A = M - m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
    pub amplitude: f64,
}

pub fn extrema(f: &Field) -> Extrema {
    let (min, max) = f
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    Extrema {
        min,
        max,
        amplitude: max - min,
    }
}
