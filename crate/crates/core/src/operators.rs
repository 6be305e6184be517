//! Discrete half-Laplacians, the principal-value quadrature, spectral
//! derivatives, and the seminorms the conservation laws are written in.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NlbError, Result};
use crate::fourier;
use crate::grid::{dft, Field, Grid};
use crate::kernels::{regularized_symbol, KernelSpec};

/// Rows at or above this size are summed in parallel.
const PAR_THRESHOLD: usize = 128;

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline(always)]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline(always)]
    pub(crate) fn total(self) -> f64 {
        self.sum + self.comp
    }
}

/// Diagonal-excluded quadrature of the periodic kernel on a fixed grid.
///
/// Every row sum runs over offsets `m = 1..n` in ascending order with
/// compensated accumulation, so results do not depend on the thread count
/// and grid-aligned shifts commute with the operator bit for bit.
#[derive(Debug, Clone)]
pub struct Quadrature {
    grid: Grid,
    spec: KernelSpec,
    table: Vec<f64>,
}

impl Quadrature {
    pub fn new(grid: Grid, spec: KernelSpec) -> Self {
        Self {
            grid,
            spec,
            table: spec.table(&grid),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    /// `K_per(m delta)` for offsets `m = 0..n` (slot 0 unused).
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Fills `out[i] = scale * sum_{m=1}^{n-1} K_m term(i, j)` with
    /// `j = (i + m) mod n`.
    pub fn row_sums<F>(&self, scale: f64, out: &mut [f64], term: F)
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let n = self.grid.n();
        assert_eq!(out.len(), n);
        let table = &self.table;
        let row = |i: usize| -> f64 {
            let mut acc = Compensated::default();
            for (m, &k) in table.iter().enumerate().skip(1) {
                let mut j = i + m;
                if j >= n {
                    j -= n;
                }
                acc.add(k * term(i, j));
            }
            scale * acc.total()
        };
        if n >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = row(i));
        } else {
            out.iter_mut().enumerate().for_each(|(i, o)| *o = row(i));
        }
    }

    /// `out_i = delta sum_{j != i} K_per(x_j - x_i) (f_j - f_i) g_j`.
    pub fn apply_into(&self, f: &[f64], g: &[f64], out: &mut [f64]) {
        self.row_sums(self.grid.mesh(), out, |i, j| (f[j] - f[i]) * g[j]);
    }

    /// Full double sum `delta^2 sum_{i != j} K_ij term(i, j)`.
    pub fn double_sum<F>(&self, term: F) -> f64
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let mut rows = vec![0.0; self.grid.n()];
        self.row_sums(1.0, &mut rows, term);
        let mut acc = Compensated::default();
        for r in rows {
            acc.add(r);
        }
        let d = self.grid.mesh();
        d * d * acc.total()
    }
}

/// Principal-value quadrature with a multiplier field `g`:
/// `out_i = delta sum_{j != i} K_per(x_j - x_i) (f_j - f_i) g_j`.
pub fn pv_apply(f: &Field, g: &Field, spec: &KernelSpec) -> Result<Field> {
    f.same_grid(g)?;
    let q = Quadrature::new(f.grid(), *spec);
    let mut out = vec![0.0; f.len()];
    q.apply_into(f.values(), g.values(), &mut out);
    Ok(Field::from_values(f.grid(), out))
}

/// `|d/dx| f` through the multiplier `|k|`.
pub fn halflap_spectral(f: &Field) -> Field {
    let out = fourier::apply_multiplier(f.values(), |k| Complex64::new(k.abs() as f64, 0.0));
    Field::from_values(f.grid(), out)
}

/// Regularized half-Laplacian with multiplier `(1 - e^{-delta|k|}) / delta`.
pub fn halflap_delta(f: &Field, delta: f64) -> Result<Field> {
    if !(delta > 0.0) {
        return Err(NlbError::InvalidParameter(format!(
            "regularization width must be positive, got {delta}"
        )));
    }
    let out = fourier::apply_multiplier(f.values(), |k| Complex64::new(regularized_symbol(k as f64, delta), 0.0));
    Ok(Field::from_values(f.grid(), out))
}

/// Spectral derivative `ik u_hat(k)`; the Nyquist mode is dropped.
pub fn grad_spectral(f: &Field) -> Field {
    let n = f.len() as i64;
    let out = fourier::apply_multiplier(f.values(), |k| {
        if k == -n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k as f64)
        }
    });
    Field::from_values(f.grid(), out)
}

/// `||f||^2_{H^{1/2}} = 2 pi sum_k |k| |f_hat(k)|^2`.
///
/// The Nyquist coefficient stands for the real mode `cos(n x / 2)`, whose
/// continuous seminorm carries half the weight of its grid value.
pub fn h_half_seminorm_sq(f: &Field) -> f64 {
    let n = f.len() as i64;
    let s = dft(f);
    let total: f64 = s
        .iter()
        .map(|(k, c)| {
            let w = if k == -n / 2 { 0.5 } else { 1.0 };
            w * k.abs() as f64 * c.norm_sqr()
        })
        .sum();
    TAU * total
}

/// Analytic norm `|f|_rho = sum_k e^{|k| rho} |f_hat(k)|`.
pub fn analytic_norm(f: &Field, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(NlbError::InvalidParameter(format!(
            "analytic radius must be nonnegative, got {rho}"
        )));
    }
    Ok(dft(f).moduli().map(|(k, a)| (k.abs() as f64 * rho).exp() * a).sum())
}

/// Map key used for exponents and radii in reports: `2`, `0.5`, `inf`.
pub fn param_key(p: f64) -> String {
    format!("{p}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub h_half_sq: f64,
    pub analytic: BTreeMap<String, f64>,
}

pub fn seminorms(f: &Field, radii: &[f64]) -> Result<SeminormReport> {
    let mut analytic = BTreeMap::new();
    for &rho in radii {
        analytic.insert(param_key(rho), analytic_norm(f, rho)?);
    }
    Ok(SeminormReport {
        h_half_sq: h_half_seminorm_sq(f),
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_norm, make_grid};
    use proptest::prelude::*;
    use std::f64::consts::{E, PI};

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn field(n: usize, f: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(make_grid(n).unwrap(), f).unwrap()
    }

    #[test]
    fn halflap_spectral_examples() {
        let c = field(32, |_| 4.0);
        assert!(halflap_spectral(&c).values().iter().all(|v| v.abs() < 1e-14));
        let s3 = field(64, |x| (3.0 * x).sin());
        assert!(max_diff(&halflap_spectral(&s3), &field(64, |x| 3.0 * (3.0 * x).sin())) < 1e-13);
        let u = field(64, |x| 2.0 + x.sin() + 0.3 * (5.0 * x).cos());
        let want = field(64, |x| x.sin() + 1.5 * (5.0 * x).cos());
        assert!(max_diff(&halflap_spectral(&u), &want) < 1e-13);
    }

    #[test]
    fn symbol_consistency_on_every_resolved_mode() {
        let n = 64;
        for k in 0..=(n / 4) {
            let kf = k as f64;
            let c = field(n, |x| (kf * x).cos());
            let s = field(n, |x| (kf * x).sin());
            assert!(max_diff(&halflap_spectral(&c), &c.scaled(kf)) < 1e-12);
            assert!(max_diff(&halflap_spectral(&s), &s.scaled(kf)) < 1e-12);
        }
    }

    #[test]
    fn halflap_delta_examples() {
        let c = field(32, |_| -1.5);
        assert!(halflap_delta(&c, 0.3).unwrap().values().iter().all(|v| v.abs() < 1e-14));
        let s = field(32, f64::sin);
        let mult = 1.0 - (-1.0_f64).exp();
        assert!((mult - 0.632_12).abs() < 1e-5);
        assert!(max_diff(&halflap_delta(&s, 1.0).unwrap(), &s.scaled(mult)) < 1e-13);
        assert!(halflap_delta(&s, 0.0).is_err());
    }

    #[test]
    fn halflap_delta_converges_with_second_derivative_bound() {
        // per-mode: | |k| - (1 - e^{-delta|k|})/delta | <= delta k^2 / 2
        for k in 1..200 {
            for delta in [1e-3, 1e-2, 0.1, 1.0] {
                let kf = k as f64;
                let gap = (kf - regularized_symbol(kf, delta)).abs();
                assert!(gap <= 0.5 * delta * kf * kf + 1e-12);
            }
        }
        let f = field(128, |x| 1.0 + x.sin() + 0.5 * (4.0 * x).cos() - 0.2 * (9.0 * x).sin());
        let f2 = field(128, |x| -x.sin() - 8.0 * (4.0 * x).cos() + 16.2 * (9.0 * x).sin());
        let f2_norm = lp_norm(&f2, 2.0).unwrap();
        let exact = halflap_spectral(&f);
        let mut prev = f64::INFINITY;
        for delta in [0.5, 0.1, 0.02, 0.004] {
            let approx = halflap_delta(&f, delta).unwrap();
            let diff = Field::new(
                f.grid(),
                approx.values().iter().zip(exact.values()).map(|(a, b)| a - b).collect(),
            )
            .unwrap();
            let err = lp_norm(&diff, 2.0).unwrap();
            assert!(err <= delta * f2_norm, "delta={delta}: {err}");
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn grad_spectral_examples() {
        assert!(grad_spectral(&field(16, |_| 2.0))
            .values()
            .iter()
            .all(|v| v.abs() < 1e-14));
        assert!(max_diff(&grad_spectral(&field(64, f64::sin)), &field(64, f64::cos)) < 1e-13);
        let c5 = field(64, |x| (5.0 * x).cos());
        assert!(max_diff(&grad_spectral(&c5), &field(64, |x| -5.0 * (5.0 * x).sin())) < 1e-12);
        // Nyquist content has no derivative on the grid
        let nyq = field(16, |x| (8.0 * x).cos());
        assert!(grad_spectral(&nyq).values().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn h_half_examples() {
        assert!(h_half_seminorm_sq(&field(32, |_| 7.0)) < 1e-24);
        assert!((h_half_seminorm_sq(&field(64, f64::sin)) - PI).abs() < 1e-12);
        let u = field(64, |x| x.sin() + (5.0 * x).cos());
        assert!((h_half_seminorm_sq(&u) - 6.0 * PI).abs() < 1e-11);
    }

    #[test]
    fn analytic_norm_examples() {
        let c = field(32, |_| -2.5);
        for rho in [0.0, 0.5, 3.0] {
            assert!((analytic_norm(&c, rho).unwrap() - 2.5).abs() < 1e-13);
        }
        // e^{|k| rho} amplifies round-off in empty modes; keep n small
        let s = field(16, f64::sin);
        assert!((analytic_norm(&s, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((analytic_norm(&s, 1.0).unwrap() - E).abs() < 1e-11);
        assert!(analytic_norm(&s, -0.1).is_err());
        let r = seminorms(&s, &[0.0, 1.0]).unwrap();
        assert!((r.analytic["1"] - E).abs() < 1e-11);
        assert!((r.h_half_sq - PI).abs() < 1e-12);
    }

    #[test]
    fn pv_apply_examples() {
        let spec = KernelSpec::spectrally_consistent();
        let c = field(64, |_| 3.0);
        let g = field(64, |x| 1.0 + x.cos());
        assert!(pv_apply(&c, &g, &spec)
            .unwrap()
            .values()
            .iter()
            .all(|v| v.abs() < 1e-13));

        // With g = 1 the quadrature is -|d/dx| up to the symbol defect k^2/n.
        let n = 256;
        let f = field(n, f64::sin);
        let one = field(n, |_| 1.0);
        let out = pv_apply(&f, &one, &spec).unwrap();
        assert!(max_diff(&out, &f.scaled(-1.0)) < 2e-2);
        assert!((max_diff(&out, &f.scaled(-1.0)) - 1.0 / n as f64).abs() < 1e-10);

        let other = field(32, f64::sin);
        assert!(matches!(
            pv_apply(&f, &other, &spec),
            Err(NlbError::GridMismatch { .. })
        ));
    }

    #[test]
    fn pv_apply_converges_at_first_order() {
        let spec = KernelSpec::spectrally_consistent();
        let mut errs = vec![];
        for n in [32, 64, 128, 256] {
            let f = field(n, |x| 1.0 / (1.5 + x.cos()));
            let one = field(n, |_| 1.0);
            let out = pv_apply(&f, &one, &spec).unwrap();
            errs.push(max_diff(&out, &halflap_spectral(&f).scaled(-1.0)));
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 0.95, "{errs:?}");
        }
    }

    #[test]
    fn pv_apply_matches_spectral_rhs_on_smooth_data() {
        // pv(u, u) = u |d/dx| u - |d/dx|(u^2) in the continuum
        let spec = KernelSpec::spectrally_consistent();
        let n = 256;
        let u = field(n, |x| 2.0 + x.sin());
        let quad = pv_apply(&u, &u, &spec).unwrap();
        let lu = halflap_spectral(&u);
        let u2 = field(n, |x| (2.0 + x.sin()).powi(2));
        let spec_rhs: Vec<f64> = u
            .values()
            .iter()
            .zip(lu.values())
            .zip(halflap_spectral(&u2).values())
            .map(|((a, b), c)| a * b - c)
            .collect();
        let spec_rhs = Field::new(u.grid(), spec_rhs).unwrap();
        let scale = spec_rhs.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(max_diff(&quad, &spec_rhs) / scale < 2e-2);
    }

    #[test]
    fn quadrature_bridging_constant_is_pi() {
        // Momentum gain of the paper-normalized quadrature over the spectral seminorm.
        let spec = KernelSpec::paper_exact();
        let mut last = 0.0;
        for n in [64, 256, 1024] {
            let u = field(n, |x| 2.0 + x.sin() + 0.3 * (5.0 * x).cos());
            let out = pv_apply(&u, &u, &spec).unwrap();
            let gain: f64 = u.grid().mesh() * out.values().iter().sum::<f64>();
            last = gain / h_half_seminorm_sq(&u);
        }
        assert!((last - PI).abs() < 1e-2 * PI);
        assert!((spec.bridging() - PI).abs() < 1e-15);
        assert!((KernelSpec::spectrally_consistent().bridging() - 1.0).abs() < 1e-15);
    }

    fn random_field(n: usize) -> impl Strategy<Value = Field> {
        proptest::collection::vec(-3.0..3.0f64, n).prop_map(move |v| Field::new(make_grid(n).unwrap(), v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn operators_are_linear(f in random_field(32), g in random_field(32), a in -2.0..2.0f64) {
            let spec = KernelSpec::spectrally_consistent();
            let comb = Field::new(
                f.grid(),
                f.values().iter().zip(g.values()).map(|(x, y)| a * x + y).collect(),
            ).unwrap();
            let lin = |op: &dyn Fn(&Field) -> Field| {
                let lhs = op(&comb);
                let (of, og) = (op(&f), op(&g));
                lhs.values().iter().zip(of.values().iter().zip(og.values()))
                    .map(|(l, (x, y))| (l - (a * x + y)).abs())
                    .fold(0.0, f64::max)
            };
            prop_assert!(lin(&halflap_spectral) < 1e-11);
            prop_assert!(lin(&grad_spectral) < 1e-11);
            prop_assert!(lin(&|h: &Field| halflap_delta(h, 0.2).unwrap()) < 1e-11);
            let w = g.clone();
            prop_assert!(lin(&|h: &Field| pv_apply(h, &w, &spec).unwrap()) < 1e-10);
        }

        #[test]
        fn constants_are_annihilated(c in -10.0..10.0f64, g in random_field(32)) {
            let f = Field::constant(g.grid(), c);
            let spec = KernelSpec::paper_exact();
            for out in [
                halflap_spectral(&f),
                halflap_delta(&f, 0.7).unwrap(),
                grad_spectral(&f),
                pv_apply(&f, &g, &spec).unwrap(),
            ] {
                prop_assert!(out.values().iter().all(|v| v.abs() <= 1e-12 * c.abs().max(1.0)));
            }
        }

        #[test]
        fn h_half_vanishes_only_on_constants(f in random_field(16)) {
            let spread = f.values().iter().fold(0.0_f64, |m, v| m.max((v - f.mean()).abs()));
            let h = h_half_seminorm_sq(&f);
            prop_assert!(h >= 0.0);
            if spread > 1e-6 {
                prop_assert!(h > 1e-12);
            }
        }

        #[test]
        fn analytic_norm_nondecreasing_in_radius(f in random_field(16), r in 0.0..2.0f64) {
            prop_assert!(analytic_norm(&f, r).unwrap() <= analytic_norm(&f, r + 0.1).unwrap());
        }
    }
}
