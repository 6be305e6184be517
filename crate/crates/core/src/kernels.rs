//! Convolution kernels and Fourier symbols.
//!
//! The 1D half-Laplacian `|d/dx|` has the singular-integral kernel
//! `c_1 / z^2`; periodizing it over `2 pi Z` gives
//! `c_1 / (4 sin^2(z/2))`. Its constant is a choice:
//!
//! * [`KernelMode::PaperExact`]: `c_1 = 1`, the bare `1/(4 sin^2(z/2))`
//!   used by the forward Euler scheme of the original simulations. Time
//!   runs `pi` times faster than with the symbol `|k|`.
//! * [`KernelMode::SpectrallyConsistent`] (default): `c_1 = 1/pi`, so the
//!   quadrature operator and the multiplier `|k|` describe the same
//!   dynamics.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{NlbError, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum KernelMode {
    #[serde(rename = "paper", alias = "paper_exact")]
    PaperExact,
    #[default]
    #[serde(rename = "spectral", alias = "spectrally_consistent")]
    SpectrallyConsistent,
}

impl KernelMode {
    pub fn name(self) -> &'static str {
        match self {
            KernelMode::PaperExact => "paper",
            KernelMode::SpectrallyConsistent => "spectral",
        }
    }
}

/// Normalization of the 1D kernel `K(z) = c_1 / |z|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelSpec {
    pub mode: KernelMode,
}

impl KernelSpec {
    pub const fn new(mode: KernelMode) -> Self {
        Self { mode }
    }

    pub const fn paper_exact() -> Self {
        Self::new(KernelMode::PaperExact)
    }

    pub const fn spectrally_consistent() -> Self {
        Self::new(KernelMode::SpectrallyConsistent)
    }

    pub fn c1(&self) -> f64 {
        match self.mode {
            KernelMode::PaperExact => 1.0,
            KernelMode::SpectrallyConsistent => 1.0 / PI,
        }
    }

    /// Factor by which a quadrature-driven momentum gain exceeds the
    /// spectral `H^{1/2}` seminorm: `pi c_1`.
    pub fn bridging(&self) -> f64 {
        PI * self.c1()
    }

    /// `K_per(m delta)` for `m = 0..n`; slot 0 is unused and set to zero.
    pub fn table(&self, grid: &Grid) -> Vec<f64> {
        let c1 = self.c1();
        let delta = grid.mesh();
        let mut k = Vec::with_capacity(grid.n());
        k.push(0.0);
        for m in 1..grid.n() {
            let s = (0.5 * m as f64 * delta).sin();
            k.push(c1 / (4.0 * s * s));
        }
        k
    }

    /// Total quadrature weight `W = delta sum_{m != 0} K_per(m delta)`.
    pub fn quadrature_weight(&self, grid: &Grid) -> f64 {
        grid.mesh() * self.table(grid).iter().sum::<f64>()
    }
}

fn check_off_singularity(z: f64) -> Result<()> {
    let r = z.rem_euclid(TAU);
    if !z.is_finite() || r.min(TAU - r) < 1e-14 {
        return Err(NlbError::Singular(z));
    }
    Ok(())
}

/// `c_1 / (4 sin^2(z/2))`.
pub fn periodic_kernel(z: f64, spec: &KernelSpec) -> Result<f64> {
    check_off_singularity(z)?;
    let s = (0.5 * z).sin();
    Ok(spec.c1() / (4.0 * s * s))
}

/// Desingularized kernel `c_1 / (delta^2 + z^2)`.
pub fn regularized_kernel(z: f64, delta: f64, spec: &KernelSpec) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(NlbError::InvalidParameter(format!(
            "regularization width must be positive, got {delta}"
        )));
    }
    Ok(spec.c1() / (delta * delta + z * z))
}

/// Symbol of the regularized half-Laplacian, `(1 - e^{-delta |xi|}) / delta`.
///
/// `delta = 0` returns the limit `|xi|`.
pub fn regularized_symbol(xi: f64, delta: f64) -> f64 {
    assert!(delta >= 0.0, "regularization width must be nonnegative");
    let a = xi.abs();
    if delta == 0.0 {
        a
    } else {
        -(-delta * a).exp_m1() / delta
    }
}

/// Kernel of the `w = u^2` equation: harmonic-mean weight
/// `2 u_x u_y / (u_x + u_y)` times the periodic kernel.
pub fn w_kernel(ux: f64, uy: f64, z: f64, spec: &KernelSpec) -> Result<f64> {
    if !(ux > 0.0) {
        return Err(NlbError::NotPositive { index: 0, value: ux });
    }
    if !(uy > 0.0) {
        return Err(NlbError::NotPositive { index: 1, value: uy });
    }
    Ok(harmonic_weight(ux, uy) * periodic_kernel(z, spec)?)
}

#[inline]
pub(crate) fn harmonic_weight(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Two-sided ellipticity constant of the `w`-kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBound {
    pub lambda: f64,
}

impl EllipticityBound {
    /// Whether `lambda^-1 K <= k <= lambda K` holds for the kernel ratio
    /// `k / K`.
    pub fn admits(&self, ratio: f64) -> bool {
        let slack = 1e-12;
        ratio >= (1.0 - slack) / self.lambda && ratio <= self.lambda * (1.0 + slack)
    }
}

/// `Lambda = max(max u, max 1/u)` for a strictly positive field.
pub fn ellipticity_of(u: &Field) -> Result<EllipticityBound> {
    let mut hi = 1.0_f64;
    for (index, &value) in u.values().iter().enumerate() {
        if !(value > 0.0) {
            return Err(NlbError::NotPositive { index, value });
        }
        hi = hi.max(value).max(1.0 / value);
    }
    Ok(EllipticityBound { lambda: hi })
}
