//! Numerical laboratory for the non-local Burgers equation
//!
//! ```text
//! u_t - u |d/dx| u + |d/dx|(u^2) = 0      on the circle [-pi, pi)
//! ```
//!
//! The crate evolves periodic data under several equivalent formulations
//! (direct singular-integral quadrature, pseudospectral, the symmetrized
//! `w = u^2` equation, the mean/fluctuation split, a P1 finite-element
//! system, and the frozen-mean variant) and monitors the structural laws of
//! the equation along every run: energy conservation, the momentum law,
//! the max/min principles, higher `L^p` balances, amplitude decay and the
//! BKM gradient integral.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
mod fourier;
pub mod grid;
pub mod integrators;
pub mod kernels;
pub mod operators;
pub mod scenarios;

pub use diagnostics::{DiagnosticsConfig, DiagnosticsRecord};
pub use dynamics::{EquationForm, System};
pub use error::{NlbError, Result};
pub use grid::{dft, extrema, idft, lp_norm, make_grid, Extrema, Field, Grid, Spectrum};
pub use integrators::{evolve, RunStatus, Scheme, StepControl, Trajectory};
pub use kernels::{KernelMode, KernelSpec};
pub use scenarios::{preset, ScenarioPreset};
