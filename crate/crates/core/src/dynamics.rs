//! Right-hand sides of every formulation of the evolution.
//!
//! All forms describe `u_t = u |d/dx| u - |d/dx|(u^2)`:
//!
//! | form            | state        | discretization                                  |
//! |-----------------|--------------|-------------------------------------------------|
//! | `u_quadrature`  | `u`          | diagonal-excluded kernel sum (forward scheme)   |
//! | `u_spectral`    | `u`          | multiplier `|k|`, products de-aliased by padding |
//! | `w`             | `w = u^2`    | harmonic-mean kernel, symmetric Dirichlet form  |
//! | `v`             | `(v, mu)`    | fluctuation `v = u - mu` plus the running mean  |
//! | `frozen`        | `v`          | commutator with the mean feedback removed       |
//! | `fem`           | nodal `U`    | P1 mass matrix, collocated load `A U' = J(U,U)` |

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NlbError, Result};
use crate::fourier::{self, wavenumber, Dealiaser};
use crate::grid::{Field, Grid};
use crate::kernels::{harmonic_weight, KernelSpec};
use crate::operators::Quadrature;

/// Mean of a fluctuation field must vanish to this absolute tolerance.
pub const MEAN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquationForm {
    #[serde(rename = "u_quadrature")]
    UQuadrature,
    #[serde(rename = "u_spectral")]
    USpectral,
    #[serde(rename = "w", alias = "w_symmetrized")]
    WSymmetrized,
    #[serde(rename = "v", alias = "v_fluctuation")]
    VFluctuation,
    #[serde(rename = "frozen")]
    Frozen,
    #[serde(rename = "fem")]
    Fem,
}

impl EquationForm {
    pub const ALL: [EquationForm; 6] = [
        EquationForm::UQuadrature,
        EquationForm::USpectral,
        EquationForm::WSymmetrized,
        EquationForm::VFluctuation,
        EquationForm::Frozen,
        EquationForm::Fem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EquationForm::UQuadrature => "u_quadrature",
            EquationForm::USpectral => "u_spectral",
            EquationForm::WSymmetrized => "w",
            EquationForm::VFluctuation => "v",
            EquationForm::Frozen => "frozen",
            EquationForm::Fem => "fem",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "u_quadrature" => Some(Self::UQuadrature),
            "u_spectral" => Some(Self::USpectral),
            "w" | "w_symmetrized" => Some(Self::WSymmetrized),
            "v" | "v_fluctuation" => Some(Self::VFluctuation),
            "frozen" => Some(Self::Frozen),
            "fem" => Some(Self::Fem),
            _ => None,
        }
    }

    /// Whether the form is driven by the kernel quadrature (and so by the
    /// kernel normalization) rather than by the symbol `|k|`.
    pub fn uses_quadrature(self) -> bool {
        matches!(
            self,
            EquationForm::UQuadrature | EquationForm::WSymmetrized | EquationForm::Fem
        )
    }

    /// Whether the form evolves the full equation (as opposed to the
    /// frozen-mean variant).
    pub fn is_full_equation(self) -> bool {
        self != EquationForm::Frozen
    }
}

impl fmt::Display for EquationForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pseudospectral evaluation of the commutator `v|d/dx|v - |d/dx|(v^2)`.
#[derive(Debug)]
struct Commutator {
    n: usize,
    dealiaser: Dealiaser,
}

struct CommutatorParts {
    /// Coefficients of `P(v L v) - L P(v^2)` (Nyquist slot zero).
    coeffs: Vec<Complex64>,
    /// Coefficients of the input with the Nyquist slot dropped.
    input: Vec<Complex64>,
    /// Spatial mean of `v L v`, i.e. `sum_k |k| |v_hat(k)|^2`.
    mean_vlv: f64,
}

impl Commutator {
    fn new(n: usize) -> Self {
        Self {
            n,
            dealiaser: Dealiaser::new(n),
        }
    }

    fn eval(&self, v: &[f64]) -> CommutatorParts {
        let n = self.n;
        let mut c = fourier::forward(v);
        fourier::drop_nyquist(&mut c);
        let lc: Vec<Complex64> = c
            .iter()
            .enumerate()
            .map(|(m, z)| z * wavenumber(m, n).abs() as f64)
            .collect();
        let fine_v = self.dealiaser.to_fine(&c);
        let fine_lv = self.dealiaser.to_fine(&lc);
        let vlv = fine_v
            .iter()
            .zip(&fine_lv)
            .map(|(a, b)| Complex64::new(a.re * b.re, 0.0))
            .collect();
        let vv = fine_v.iter().map(|a| Complex64::new(a.re * a.re, 0.0)).collect();
        let p_vlv = self.dealiaser.to_coarse(vlv);
        let p_vv = self.dealiaser.to_coarse(vv);
        let coeffs = p_vlv
            .iter()
            .zip(&p_vv)
            .enumerate()
            .map(|(m, (a, b))| a - b * wavenumber(m, n).abs() as f64)
            .collect();
        CommutatorParts {
            coeffs,
            input: c,
            mean_vlv: p_vlv[0].re,
        }
    }
}

/// Circulant P1 mass matrix of the finite-element formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSystem {
    pub grid: Grid,
    /// `(delta/6) [1, 4, 1]`.
    pub mass_stencil: [f64; 3],
    /// DFT eigenvalues of the mass matrix in FFT slot order.
    pub mass_eigs: Vec<f64>,
}

impl FemSystem {
    /// Eigenvalue `(delta/6)(4 + 2 cos(2 pi k / n))` for wavenumber `k`.
    pub fn eig(&self, k: i64) -> f64 {
        self.mass_eigs[k.rem_euclid(self.grid.n() as i64) as usize]
    }

    /// Discrete energy `U^T A U`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let n = u.len();
        let [lo, mid, hi] = self.mass_stencil;
        (0..n)
            .map(|i| u[i] * (lo * u[(i + n - 1) % n] + mid * u[i] + hi * u[(i + 1) % n]))
            .sum()
    }

    /// Applies `A^{-1}` through the circulant diagonalization.
    pub fn solve_mass(&self, rhs: &[f64]) -> Vec<f64> {
        let mut c = fourier::forward(rhs);
        for (cm, &lam) in c.iter_mut().zip(&self.mass_eigs) {
            *cm /= lam;
        }
        fourier::inverse_real(&c)
    }

    /// Ratio `delta / min eigenvalue`: how much `A^{-1} delta` amplifies the
    /// stiffest mode.
    pub fn stiffness(&self) -> f64 {
        let min = self.mass_eigs.iter().copied().fold(f64::INFINITY, f64::min);
        self.grid.mesh() / min
    }
}

/// Assembles the P1 mass matrix on `grid`.
pub fn fem_assemble(grid: Grid) -> FemSystem {
    let n = grid.n();
    let d = grid.mesh();
    let mass_eigs = (0..n)
        .map(|m| {
            let theta = std::f64::consts::TAU * m as f64 / n as f64;
            d / 6.0 * (4.0 + 2.0 * theta.cos())
        })
        .collect();
    FemSystem {
        grid,
        mass_stencil: [d / 6.0, 4.0 * d / 6.0, d / 6.0],
        mass_eigs,
    }
}

/// A formulation bound to a grid, with its kernel tables, FFT scratch and
/// mass matrix precomputed.
#[derive(Debug)]
pub struct System {
    grid: Grid,
    form: EquationForm,
    spec: KernelSpec,
    quadrature: Quadrature,
    commutator: Commutator,
    fem: Option<FemSystem>,
}

impl System {
    pub fn new(grid: Grid, form: EquationForm, spec: KernelSpec) -> Self {
        Self {
            grid,
            form,
            spec,
            quadrature: Quadrature::new(grid, spec),
            commutator: Commutator::new(grid.n()),
            fem: (form == EquationForm::Fem).then(|| fem_assemble(grid)),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn form(&self) -> EquationForm {
        self.form
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    pub fn fem(&self) -> Option<&FemSystem> {
        self.fem.as_ref()
    }

    /// Length of the state vector (`n`, or `n + 1` with the running mean).
    pub fn state_len(&self) -> usize {
        match self.form {
            EquationForm::VFluctuation => self.grid.n() + 1,
            _ => self.grid.n(),
        }
    }

    /// Translates initial data `u0` into this form's state.
    pub fn init_state(&self, u0: &Field) -> Result<Vec<f64>> {
        if u0.grid() != self.grid {
            return Err(NlbError::GridMismatch {
                left: self.grid.n(),
                right: u0.grid().n(),
            });
        }
        let u = u0.values();
        Ok(match self.form {
            EquationForm::WSymmetrized => {
                if let Some((index, &value)) = u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                    return Err(NlbError::NotPositive { index, value });
                }
                u.iter().map(|v| v * v).collect()
            }
            EquationForm::VFluctuation => {
                let mu = u0.mean();
                let mut s: Vec<f64> = u.iter().map(|v| v - mu).collect();
                s.push(mu);
                s
            }
            _ => u.to_vec(),
        })
    }

    /// Physical field `u` carried by a state vector.
    pub fn physical(&self, state: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        match self.form {
            EquationForm::WSymmetrized => state.iter().map(|w| w.max(0.0).sqrt()).collect(),
            EquationForm::VFluctuation => state[..n].iter().map(|v| v + state[n]).collect(),
            _ => state.to_vec(),
        }
    }

    /// Factor by which this form's fastest mode outruns the bare
    /// quadrature operator; divides the CFL step.
    ///
    /// The quadrature symbol peaks at `c_b n/4`, the exact symbol `|k|` at
    /// `n/2`, and the mass inverse amplifies the quadrature by up to 3.
    pub fn stiffness(&self) -> f64 {
        match self.form {
            EquationForm::UQuadrature | EquationForm::WSymmetrized => 1.0,
            EquationForm::Fem => self.fem.as_ref().map_or(1.0, FemSystem::stiffness),
            EquationForm::USpectral | EquationForm::VFluctuation | EquationForm::Frozen => 2.0 / self.spec.bridging(),
        }
    }

    /// Evaluates the time derivative of `state` into `out`.
    pub fn rhs(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.grid.n();
        debug_assert_eq!(state.len(), self.state_len());
        debug_assert_eq!(out.len(), self.state_len());
        match self.form {
            EquationForm::UQuadrature => {
                self.quadrature.apply_into(state, state, out);
            }
            EquationForm::Fem => {
                self.quadrature.apply_into(state, state, out);
                let d = self.grid.mesh();
                for o in out.iter_mut() {
                    *o *= d;
                }
                let solved = self.fem.as_ref().expect("fem system").solve_mass(out);
                out.copy_from_slice(&solved);
            }
            EquationForm::WSymmetrized => self.rhs_w_into(state, out)?,
            EquationForm::USpectral => {
                let parts = self.commutator.eval(state);
                out.copy_from_slice(&fourier::inverse_real(&parts.coeffs));
            }
            EquationForm::Frozen => {
                let mut parts = self.commutator.eval(state);
                parts.coeffs[0] = Complex64::new(0.0, 0.0);
                out.copy_from_slice(&fourier::inverse_real(&parts.coeffs));
            }
            EquationForm::VFluctuation => {
                let (v, mu) = (&state[..n], state[n]);
                let parts = self.commutator.eval(v);
                if parts.input[0].re.abs() > MEAN_TOLERANCE {
                    return Err(NlbError::NonZeroMean(parts.input[0].re));
                }
                let mut coeffs = parts.coeffs;
                for (m, (cm, vm)) in coeffs.iter_mut().zip(&parts.input).enumerate() {
                    *cm -= vm * (mu * wavenumber(m, n).abs() as f64);
                }
                coeffs[0] = Complex64::new(0.0, 0.0);
                out[..n].copy_from_slice(&fourier::inverse_real(&coeffs));
                out[n] = parts.mean_vlv;
            }
        }
        Ok(())
    }

    fn rhs_w_into(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        if let Some((index, &value)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(NlbError::NotPositive { index, value });
        }
        let a: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        self.quadrature.row_sums(self.grid.mesh(), out, |i, j| {
            (w[j] - w[i]) * harmonic_weight(a[i], a[j])
        });
        Ok(())
    }

    /// Convenience wrapper returning a fresh vector.
    pub fn rhs_vec(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; state.len()];
        self.rhs(state, &mut out)?;
        Ok(out)
    }
}

/// Forward-scheme bracket `delta sum_{j != i} K_per(x_j - x_i)(u_j - u_i) u_j`.
pub fn rhs_u_quadrature(u: &Field, spec: &KernelSpec) -> Field {
    let sys = System::new(u.grid(), EquationForm::UQuadrature, *spec);
    let out = sys.rhs_vec(u.values()).expect("quadrature rhs is infallible");
    Field::from_values(u.grid(), out)
}

/// Pseudospectral `u |d/dx| u - |d/dx|(u^2)` with de-aliased products.
pub fn rhs_u_spectral(u: &Field) -> Field {
    let sys = System::new(u.grid(), EquationForm::USpectral, KernelSpec::default());
    let out = sys.rhs_vec(u.values()).expect("spectral rhs is infallible");
    Field::from_values(u.grid(), out)
}

/// `delta sum_{j != i} (w_j - w_i) k(x_i, x_j)` with the harmonic-mean kernel
/// built from `u = sqrt(w)`.
pub fn rhs_w(w: &Field, spec: &KernelSpec) -> Result<Field> {
    let sys = System::new(w.grid(), EquationForm::WSymmetrized, *spec);
    Ok(Field::from_values(w.grid(), sys.rhs_vec(w.values())?))
}

/// Time derivatives `(v', mu')` of the fluctuation form.
pub fn rhs_v_fluctuation(v: &Field, mu: f64) -> Result<(Field, f64)> {
    let sys = System::new(v.grid(), EquationForm::VFluctuation, KernelSpec::default());
    let mut state = v.values().to_vec();
    state.push(mu);
    let mut out = sys.rhs_vec(&state)?;
    let dmu = out.pop().expect("state carries the mean");
    Ok((Field::from_values(v.grid(), out), dmu))
}

/// Frozen-mean variant `[v, |d/dx|] v - mean(v |d/dx| v)`.
pub fn rhs_frozen(v: &Field) -> Field {
    let sys = System::new(v.grid(), EquationForm::Frozen, KernelSpec::default());
    let out = sys.rhs_vec(v.values()).expect("frozen rhs is infallible");
    Field::from_values(v.grid(), out)
}

/// `A^{-1} J(U, U)` with the collocated load `J_i = delta (rhs_u_quadrature)_i`.
pub fn fem_rhs(sys: &FemSystem, u: &Field, spec: &KernelSpec) -> Result<Field> {
    if sys.grid != u.grid() {
        return Err(NlbError::GridMismatch {
            left: sys.grid.n(),
            right: u.grid().n(),
        });
    }
    let d = sys.grid.mesh();
    let load: Vec<f64> = rhs_u_quadrature(u, spec).values().iter().map(|v| d * v).collect();
    Ok(Field::from_values(u.grid(), sys.solve_mass(&load)))
}
