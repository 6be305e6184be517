//! Monitored laws along a trajectory: per-record diagnostics, balance
//! residuals, decay fits and spectral exports.
//!
//! Time integrals use the trapezoid rule on record times, so every residual
//! below includes the sampling error of the record spacing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{NlbError, Result};
use crate::fourier;
use crate::grid::{dft, extrema, lp_norm, Field, Grid};
use crate::integrators::Trajectory;
use crate::kernels::KernelSpec;
use crate::operators::{analytic_norm, grad_spectral, h_half_seminorm_sq, param_key, Compensated, Quadrature};

/// Modes below this modulus are treated as numerical zero.
pub const SPECTRAL_FLOOR: f64 = 1e-13;

/// Which `L^p` norms, balance exponents and analytic radii a record carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub spec: KernelSpec,
    pub lp: Vec<f64>,
    pub hp: Vec<f64>,
    pub radii: Vec<f64>,
}

impl DiagnosticsConfig {
    pub fn new(spec: KernelSpec) -> Self {
        Self {
            spec,
            lp: vec![2.0, 4.0, f64::INFINITY],
            hp: vec![4.0],
            radii: vec![0.0, 0.1, 0.5],
        }
    }
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self::new(KernelSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `||u||_{L^2}`.
    pub energy: f64,
    /// `int u = delta sum u_i`.
    pub momentum: f64,
    #[serde(rename = "m")]
    pub min: f64,
    #[serde(rename = "M")]
    pub max: f64,
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub h_half_sq: f64,
    pub grad_inf: f64,
    /// `int_0^t |u_x|_inf ds`.
    pub bkm_acc: f64,
    pub lp: BTreeMap<String, f64>,
    pub analytic: BTreeMap<String, f64>,
    /// `(p/2) int_0^t D_p ds` with the quadrature double sum `D_p`.
    pub hp_acc: BTreeMap<String, f64>,
    /// Integrand of `hp_acc` at `t`, kept for the next trapezoid panel.
    #[serde(skip)]
    pub hp_rate: BTreeMap<String, f64>,
}

/// Record builder with the kernel table cached for one grid.
#[derive(Debug, Clone)]
pub struct Recorder {
    cfg: DiagnosticsConfig,
    quadrature: Quadrature,
}

impl Recorder {
    pub fn new(grid: Grid, cfg: DiagnosticsConfig) -> Result<Self> {
        for &p in &cfg.lp {
            if p.is_nan() || p < 1.0 {
                return Err(NlbError::InvalidParameter(format!("L^p exponent {p} below 1")));
            }
        }
        for &p in &cfg.hp {
            if !(p > 2.0 && p.is_finite()) {
                return Err(NlbError::InvalidParameter(format!(
                    "balance exponent must be finite and above 2, got {p}"
                )));
            }
        }
        for &rho in &cfg.radii {
            if !(rho >= 0.0 && rho.is_finite()) {
                return Err(NlbError::InvalidParameter(format!("analytic radius {rho} is invalid")));
            }
        }
        Ok(Self {
            quadrature: Quadrature::new(grid, cfg.spec),
            cfg,
        })
    }

    pub fn config(&self) -> &DiagnosticsConfig {
        &self.cfg
    }

    pub fn record(&self, u: &Field, t: f64, prev: Option<&DiagnosticsRecord>) -> Result<DiagnosticsRecord> {
        let d = u.grid().mesh();
        let ex = extrema(u);
        let grad_inf = max_abs(grad_spectral(u).values());
        let mut lp = BTreeMap::new();
        for &p in &self.cfg.lp {
            lp.insert(param_key(p), lp_norm(u, p)?);
        }
        let mut analytic = BTreeMap::new();
        for &rho in &self.cfg.radii {
            analytic.insert(param_key(rho), analytic_norm(u, rho)?);
        }
        let mut hp_acc = BTreeMap::new();
        let mut hp_rate = BTreeMap::new();
        for &p in &self.cfg.hp {
            let key = param_key(p);
            let rate = 0.5 * p * lp_dissipation(&self.quadrature, u.values(), p);
            let acc = match prev {
                Some(r) => {
                    let prev_acc = r.hp_acc.get(&key).copied().unwrap_or(0.0);
                    let prev_rate = r.hp_rate.get(&key).copied().unwrap_or(rate);
                    prev_acc + 0.5 * (t - r.t) * (rate + prev_rate)
                }
                None => 0.0,
            };
            hp_acc.insert(key.clone(), acc);
            hp_rate.insert(key, rate);
        }
        let bkm_acc = match prev {
            Some(r) => r.bkm_acc + 0.5 * (t - r.t) * (grad_inf + r.grad_inf),
            None => 0.0,
        };
        Ok(DiagnosticsRecord {
            t,
            energy: lp_norm(u, 2.0)?,
            momentum: d * compensated_sum(u.values()),
            min: ex.min,
            max: ex.max,
            amplitude: ex.amplitude,
            h_half_sq: h_half_seminorm_sq(u),
            grad_inf,
            bkm_acc,
            lp,
            analytic,
            hp_acc,
            hp_rate,
        })
    }
}

/// Standalone record with a freshly built kernel table.
pub fn record(
    u: &Field,
    t: f64,
    prev: Option<&DiagnosticsRecord>,
    cfg: &DiagnosticsConfig,
) -> Result<DiagnosticsRecord> {
    Recorder::new(u.grid(), cfg.clone())?.record(u, t, prev)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn compensated_sum(v: &[f64]) -> f64 {
    let mut acc = Compensated::default();
    for &x in v {
        acc.add(x);
    }
    acc.total()
}

/// `D_p = delta^2 sum_{i != j} K_ij u_i u_j (|u_j|^{p-2} - |u_i|^{p-2}) (u_j - u_i)`,
/// so that `d/dt ||u||_p^p = -(p/2) D_p` along the quadrature dynamics.
pub fn lp_dissipation(q: &Quadrature, u: &[f64], p: f64) -> f64 {
    let a: Vec<f64> = u.iter().map(|v| v.abs().powf(p - 2.0)).collect();
    q.double_sum(|i, j| u[i] * u[j] * (a[j] - a[i]) * (u[j] - u[i]))
}

/// Share of `sum_k |u_hat(k)|` carried by the modes `|k| > n/4`.
pub fn tail_ratio(u: &Field) -> f64 {
    let n = u.len();
    let c = fourier::forward(u.values());
    let (mut tail, mut total) = (0.0, 0.0);
    for (m, z) in c.iter().enumerate() {
        let a = z.norm();
        total += a;
        if fourier::wavenumber(m, n).unsigned_abs() as usize > n / 4 {
            tail += a;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

fn require_records(traj: &Trajectory, needed: usize) -> Result<()> {
    if traj.records.is_empty() {
        return Err(NlbError::EmptyTrajectory);
    }
    if traj.records.len() < needed {
        return Err(NlbError::TooFewRecords {
            needed,
            have: traj.records.len(),
        });
    }
    Ok(())
}

/// Per-interval check of `d/dt int u = c_b ||u||^2_{H^{1/2}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumLaw {
    /// `|delta momentum - c_b int h dt|` for each consecutive record pair.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// `momentum(t_last) - momentum(0)`.
    pub total_gain: f64,
    /// Largest decrease of momentum between records (0 if monotone).
    pub max_decrease: f64,
}

pub fn momentum_law(traj: &Trajectory) -> Result<MomentumLaw> {
    require_records(traj, 2)?;
    let c = traj.bridging();
    let residuals: Vec<f64> = traj
        .records
        .windows(2)
        .map(|w| {
            let gain = w[1].momentum - w[0].momentum;
            let integral = 0.5 * (w[1].t - w[0].t) * (w[1].h_half_sq + w[0].h_half_sq);
            (gain - c * integral).abs()
        })
        .collect();
    let max_decrease = traj
        .records
        .windows(2)
        .map(|w| w[0].momentum - w[1].momentum)
        .fold(0.0_f64, f64::max);
    Ok(MomentumLaw {
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
        total_gain: traj.last_record().momentum - traj.records[0].momentum,
        max_decrease,
    })
}

/// Largest per-interval residual of the momentum law.
pub fn momentum_law_residual(traj: &Trajectory) -> Result<f64> {
    Ok(momentum_law(traj)?.max_residual)
}

/// Long-time momentum gain `sqrt(2 pi) ||u0||_2 - int u0` predicted for
/// positive data.
pub fn predicted_momentum_gain(u0: &Field) -> Result<f64> {
    let d = u0.grid().mesh();
    Ok((2.0 * std::f64::consts::PI).sqrt() * lp_norm(u0, 2.0)? - d * compensated_sum(u0.values()))
}

/// Largest relative deviation of the energy from its initial value.
pub fn energy_drift(traj: &Trajectory) -> Result<f64> {
    require_records(traj, 1)?;
    let e0 = traj.records[0].energy;
    let worst = traj.records.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max);
    Ok(if e0 > 0.0 { worst / e0 } else { worst })
}

/// Worst violations of the extrema monotonicity laws between consecutive
/// records. Positive data should keep `max_rise` and `min_drop` near zero;
/// negative data (anti-maximum principle) keeps `max_drop` and `min_rise`
/// near zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremaTrend {
    pub max_rise: f64,
    pub max_drop: f64,
    pub min_rise: f64,
    pub min_drop: f64,
    pub amplitude_rise: f64,
}

pub fn extrema_trend(traj: &Trajectory) -> Result<ExtremaTrend> {
    require_records(traj, 1)?;
    let mut out = ExtremaTrend {
        max_rise: 0.0,
        max_drop: 0.0,
        min_rise: 0.0,
        min_drop: 0.0,
        amplitude_rise: 0.0,
    };
    for w in traj.records.windows(2) {
        out.max_rise = out.max_rise.max(w[1].max - w[0].max);
        out.max_drop = out.max_drop.max(w[0].max - w[1].max);
        out.min_rise = out.min_rise.max(w[1].min - w[0].min);
        out.min_drop = out.min_drop.max(w[0].min - w[1].min);
        out.amplitude_rise = out.amplitude_rise.max(w[1].amplitude - w[0].amplitude);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayQuantity {
    Amplitude,
    Gradient,
}

impl DecayQuantity {
    fn of(self, r: &DiagnosticsRecord) -> f64 {
        match self {
            DecayQuantity::Amplitude => r.amplitude,
            DecayQuantity::Gradient => r.grad_inf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
}

/// Values below this are not used by the default window; the fit sees only
/// well-resolved decay.
const DEFAULT_WINDOW_FLOOR: f64 = 1e-10;

/// Transient time `(1/m0) log+(A0/m0)` after which exponential decay sets in.
pub fn transient_time(traj: &Trajectory) -> f64 {
    let r0 = &traj.records[0];
    if r0.min > 0.0 {
        (r0.amplitude / r0.min).ln().max(0.0) / r0.min
    } else {
        0.0
    }
}

/// Default fit window: the later half of the resolved part of the run,
/// starting no earlier than the transient time.
pub fn default_window(traj: &Trajectory, quantity: DecayQuantity) -> Result<(f64, f64)> {
    require_records(traj, 3)?;
    let resolved = traj
        .records
        .iter()
        .take_while(|r| quantity.of(r) >= DEFAULT_WINDOW_FLOOR)
        .last()
        .map(|r| r.t)
        .ok_or_else(|| NlbError::DegenerateFit("quantity is numerically zero from the start".into()))?;
    let lo = transient_time(traj).max(0.5 * resolved);
    if lo >= resolved {
        return Err(NlbError::DegenerateFit(format!(
            "transient time {lo:.3} leaves no resolved window before t = {resolved:.3}"
        )));
    }
    Ok((lo, resolved))
}

/// Least-squares exponential rate of `quantity` on `window` (default window
/// when `None`).
pub fn fit_decay(traj: &Trajectory, window: Option<(f64, f64)>, quantity: DecayQuantity) -> Result<DecayFit> {
    let window = match window {
        Some(w) => w,
        None => default_window(traj, quantity)?,
    };
    let (lo, hi) = window;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for r in traj.records.iter().filter(|r| r.t >= lo && r.t <= hi) {
        let v = quantity.of(r);
        if !(v >= SPECTRAL_FLOOR) {
            return Err(NlbError::DegenerateFit(format!(
                "value {v:e} at t = {} is below the numerical floor",
                r.t
            )));
        }
        ts.push(r.t);
        ys.push(v.ln());
    }
    if ts.len() < 3 {
        return Err(NlbError::TooFewRecords {
            needed: 3,
            have: ts.len(),
        });
    }
    let (rate, _, r_squared) = linear_fit(&ts, &ys)?;
    Ok(DecayFit {
        rate,
        window,
        r_squared,
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, r^2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(NlbError::DegenerateFit("abscissae do not vary".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok((slope, intercept, r2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpBalance {
    pub p: f64,
    /// `max_t | ||u(t)||_p^p + (p/2) int_0^t D_p - ||u0||_p^p |`.
    pub max_residual: f64,
    /// `max_residual / ||u0||_p^p`.
    pub relative: f64,
    /// For positive runs, whether `||u||_p` never increased between records
    /// beyond rounding.
    pub norms_nonincreasing: Option<bool>,
}

/// Relative slack for monotonicity of norms that have converged.
const NORM_ROUNDING: f64 = 1e-12;

/// Higher-`L^p` balance recomputed from the stored states.
pub fn hp_balance(traj: &Trajectory, p: f64) -> Result<HpBalance> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(NlbError::InvalidParameter(format!(
            "balance exponent must exceed 2, got {p}"
        )));
    }
    require_records(traj, 1)?;
    let grid = traj.grid();
    let q = Quadrature::new(grid, traj.meta.spec);
    let d = grid.mesh();
    let norms: Vec<f64> = traj
        .states
        .iter()
        .map(|u| d * compensated_sum(&u.values().iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>()))
        .collect();
    let rates: Vec<f64> = traj
        .states
        .iter()
        .map(|u| 0.5 * p * lp_dissipation(&q, u.values(), p))
        .collect();
    let mut acc = 0.0;
    let mut worst = 0.0_f64;
    for i in 1..norms.len() {
        acc += 0.5 * (traj.times[i] - traj.times[i - 1]) * (rates[i] + rates[i - 1]);
        worst = worst.max((norms[i] + acc - norms[0]).abs());
    }
    let positive = traj.states.iter().all(|u| u.values().iter().all(|v| *v > 0.0));
    Ok(HpBalance {
        p,
        max_residual: worst,
        relative: if norms[0] > 0.0 { worst / norms[0] } else { worst },
        norms_nonincreasing: positive.then(|| norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + NORM_ROUNDING))),
    })
}

/// One row of a spectral export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub t: f64,
    pub k: i64,
    pub abs_uhat: f64,
}

/// Index of the stored state closest in time to `t`.
pub fn nearest_record(traj: &Trajectory, t: f64) -> Result<usize> {
    if traj.times.is_empty() {
        return Err(NlbError::EmptyTrajectory);
    }
    let idx = traj.times.partition_point(|&s| s < t);
    Ok(match idx {
        0 => 0,
        i if i == traj.times.len() => i - 1,
        i if (traj.times[i] - t) < (t - traj.times[i - 1]) => i,
        i => i - 1,
    })
}

/// `(t, k, |u_hat(k)|)` for the stored states nearest to `times`.
pub fn spectrum_slices(traj: &Trajectory, times: &[f64]) -> Result<Vec<SpectrumRow>> {
    let mut rows = Vec::new();
    for &t in times {
        let i = nearest_record(traj, t)?;
        let ti = traj.times[i];
        rows.extend(
            dft(&traj.states[i])
                .moduli()
                .map(|(k, a)| SpectrumRow { t: ti, k, abs_uhat: a }),
        );
    }
    Ok(rows)
}

/// About `count` record times evenly spread over the run, always including
/// the first and last.
pub fn slice_times(traj: &Trajectory, count: usize) -> Vec<f64> {
    let len = traj.times.len();
    if len == 0 {
        return Vec::new();
    }
    let count = count.max(2).min(len);
    let mut idx: Vec<usize> = (0..count).map(|s| s * (len - 1) / (count - 1)).collect();
    idx.dedup();
    idx.into_iter().map(|i| traj.times[i]).collect()
}

/// Decay width of the spectrum: slope of `-log |u_hat(k)|` against `k >= 1`
/// over the modes above [`SPECTRAL_FLOOR`]. Flat spectra give `+inf`.
pub fn analyticity_radius_of(u: &Field) -> f64 {
    let s = dft(u);
    let (ks, logs): (Vec<f64>, Vec<f64>) = s
        .moduli()
        .filter(|&(k, a)| k >= 1 && a > SPECTRAL_FLOOR)
        .map(|(k, a)| (k as f64, -a.ln()))
        .unzip();
    if ks.len() < 2 {
        return f64::INFINITY;
    }
    linear_fit(&ks, &logs).map_or(f64::INFINITY, |(slope, _, _)| slope)
}

/// `(t, rho*(t))` for every stored state.
pub fn analyticity_radius(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    require_records(traj, 1)?;
    if traj.records[0].analytic.len() < 2 {
        return Err(NlbError::InvalidParameter(
            "records must carry analytic norms at two or more radii".into(),
        ));
    }
    Ok(traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, u)| (t, analyticity_radius_of(u)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::EquationForm;
    use crate::grid::{idft, make_grid, Spectrum};
    use crate::integrators::{evolve, RunEnd, RunStatus, StepControl, TrajectoryMeta};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn field(n: usize, f: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(make_grid(n).unwrap(), f).unwrap()
    }

    fn synthetic(times: &[f64], amp: impl Fn(f64) -> f64) -> Trajectory {
        let u = field(8, |_| 1.0);
        let cfg = DiagnosticsConfig::default();
        let records: Vec<DiagnosticsRecord> = times
            .iter()
            .map(|&t| {
                let mut r = record(&u, t, None, &cfg).unwrap();
                r.amplitude = amp(t);
                r.grad_inf = amp(t);
                r.min = 1.0;
                r
            })
            .collect();
        Trajectory {
            times: times.to_vec(),
            states: vec![u; times.len()],
            records,
            status: RunStatus::Completed,
            end: RunEnd {
                status: RunStatus::Completed,
                t: *times.last().unwrap(),
                reason: None,
                steps: 0,
                max_tau: 0.0,
                min_tau: 0.0,
            },
            meta: TrajectoryMeta {
                n: 8,
                form: EquationForm::UQuadrature,
                spec: KernelSpec::default(),
                control: StepControl::default(),
            },
        }
    }

    #[test]
    fn record_of_constant() {
        let u = field(64, |_| 2.0);
        let r = record(&u, 0.0, None, &DiagnosticsConfig::default()).unwrap();
        assert!((r.energy - 2.0 * (2.0 * PI).sqrt()).abs() < 1e-13);
        assert!((r.momentum - 4.0 * PI).abs() < 1e-13);
        assert_eq!(r.amplitude, 0.0);
        assert!(r.h_half_sq.abs() < 1e-13 && r.grad_inf < 1e-13);
        assert_eq!(r.bkm_acc, 0.0);
        assert_eq!(r.hp_acc["4"], 0.0);
        assert!(r.hp_rate["4"].abs() < 1e-13);
        assert_eq!(r.lp.keys().collect::<Vec<_>>(), ["2", "4", "inf"]);
        assert_eq!(r.analytic.keys().collect::<Vec<_>>(), ["0", "0.1", "0.5"]);
    }

    #[test]
    fn record_of_shifted_sine() {
        let u = field(256, |x| 2.0 + x.sin());
        let r = record(&u, 0.0, None, &DiagnosticsConfig::default()).unwrap();
        assert!((r.momentum - 4.0 * PI).abs() < 1e-12);
        assert!((r.energy - (2.0 * PI * 4.5_f64).sqrt()).abs() < 1e-12);
        assert!((r.amplitude - 2.0).abs() < 1e-3);
        assert!((r.h_half_sq - PI).abs() < 1e-12);
        assert!((r.grad_inf - 1.0).abs() < 1e-3);
    }

    #[test]
    fn record_of_smooth_preset_has_limit_constant() {
        let u = field(64, |x| 2.0 + x.sin() + 0.3 * (5.0 * x).cos());
        let r = record(&u, 0.0, None, &DiagnosticsConfig::default()).unwrap();
        assert!((r.energy / (2.0 * PI).sqrt() - 2.1319).abs() < 1e-4);
    }

    #[test]
    fn accumulators_use_the_trapezoid_rule() {
        let cfg = DiagnosticsConfig::default();
        let a = field(32, |x| 2.0 + x.sin());
        let b = field(32, |x| 2.0 + 0.5 * x.sin());
        let ra = record(&a, 1.0, None, &cfg).unwrap();
        let rb = record(&b, 1.5, Some(&ra), &cfg).unwrap();
        assert!((rb.bkm_acc - 0.25 * (ra.grad_inf + rb.grad_inf)).abs() < 1e-15);
        let want = 0.25 * (ra.hp_rate["4"] + rb.hp_rate["4"]);
        assert!((rb.hp_acc["4"] - want).abs() < 1e-15);
    }

    #[test]
    fn lp_dissipation_matches_time_derivative() {
        // d/dt ||u||_p^p = p delta sum |u|^{p-2} u u' with u' the quadrature rhs
        let g = make_grid(32).unwrap();
        let u = field(32, |x| 2.0 + x.sin() + 0.3 * (3.0 * x).cos());
        let spec = KernelSpec::default();
        let q = Quadrature::new(g, spec);
        let du = crate::dynamics::rhs_u_quadrature(&u, &spec);
        for p in [3.0, 4.0, 6.5] {
            let direct: f64 = g.mesh()
                * u.values()
                    .iter()
                    .zip(du.values())
                    .map(|(v, dv)| p * v.abs().powf(p - 2.0) * v * dv)
                    .sum::<f64>();
            let via = -0.5 * p * lp_dissipation(&q, u.values(), p);
            assert!((direct - via).abs() < 1e-10 * direct.abs().max(1.0), "p={p}");
            assert!(via < 0.0);
        }
    }

    #[test]
    fn synthetic_exponential_fit() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
        let traj = synthetic(&times, |t| (-3.0 * t).exp());
        let fit = fit_decay(&traj, Some((0.0, 5.0)), DecayQuantity::Amplitude).unwrap();
        assert!((fit.rate + 3.0).abs() < 1e-6);
        assert!(fit.r_squared > 0.999_999);
        let fit = fit_decay(&traj, None, DecayQuantity::Gradient).unwrap();
        assert!((fit.rate + 3.0).abs() < 1e-6);
        assert!(fit.window.0 >= 2.5 - 1e-12);
    }

    #[test]
    fn fit_rejects_numerical_zero() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.2).collect();
        let traj = synthetic(&times, |t| (-3.0 * t).exp());
        let err = fit_decay(&traj, Some((0.0, 20.0)), DecayQuantity::Amplitude);
        assert!(matches!(err, Err(NlbError::DegenerateFit(_))));
        // the default window stops where the data is still resolved
        let fit = fit_decay(&traj, None, DecayQuantity::Amplitude).unwrap();
        assert!(fit.window.1 < 7.7 && (fit.rate + 3.0).abs() < 1e-6);
    }

    #[test]
    fn constant_trajectory_has_zero_residuals() {
        let u0 = field(32, |_| 1.5);
        let ctrl = StepControl {
            t_end: 1.0,
            ..StepControl::default()
        };
        let traj = evolve(&u0, &ctrl, EquationForm::UQuadrature, KernelSpec::default()).unwrap();
        assert!(momentum_law_residual(&traj).unwrap() <= 1e-12);
        assert!(hp_balance(&traj, 4.0).unwrap().max_residual <= 1e-12);
        assert!(energy_drift(&traj).unwrap() <= 1e-12);
    }

    #[test]
    fn spectrum_of_band_limited_data() {
        let u0 = field(32, |x| 2.0 + x.sin() + 0.3 * (5.0 * x).cos());
        let ctrl = StepControl {
            t_end: 0.1,
            ..StepControl::default()
        };
        let traj = evolve(&u0, &ctrl, EquationForm::UQuadrature, KernelSpec::default()).unwrap();
        let rows = spectrum_slices(&traj, &[0.0]).unwrap();
        assert_eq!(rows.len(), 32);
        for r in rows {
            let active = [0, 1, -1, 5, -5].contains(&r.k);
            assert_eq!(active, r.abs_uhat > 1e-12, "k={}", r.k);
        }
        let c = field(16, |_| 3.0);
        let s = dft(&c);
        assert!(s.moduli().all(|(k, a)| (k == 0) == (a > 1e-14)));
    }

    #[test]
    fn slices_cover_the_run() {
        let times: Vec<f64> = (0..=50).map(|i| i as f64).collect();
        let traj = synthetic(&times, |_| 1.0);
        let ts = slice_times(&traj, 11);
        assert_eq!(ts.first(), Some(&0.0));
        assert_eq!(ts.last(), Some(&50.0));
        assert_eq!(ts.len(), 11);
        assert_eq!(nearest_record(&traj, 7.4).unwrap(), 7);
        assert_eq!(nearest_record(&traj, 7.6).unwrap(), 8);
        assert_eq!(nearest_record(&traj, 99.0).unwrap(), 50);
    }

    #[test]
    fn radius_of_exponential_spectrum() {
        let g = make_grid(64).unwrap();
        let coeffs = g
            .wavenumbers()
            .map(|k| Complex64::new((-2.0 * k.abs() as f64).exp(), 0.0))
            .collect();
        let u = idft(&Spectrum::new(g, coeffs).unwrap());
        let rho = analyticity_radius_of(&u);
        assert!((rho - 2.0).abs() < 0.1, "rho = {rho}");
        assert_eq!(analyticity_radius_of(&Field::constant(g, 2.0)), f64::INFINITY);
    }

    #[test]
    fn tail_ratio_examples() {
        assert_eq!(tail_ratio(&field(32, |_| 1.0)), 0.0);
        let u = field(32, |x| (12.0 * x).cos());
        assert!((tail_ratio(&u) - 1.0).abs() < 1e-12);
        let u = field(32, |x| 1.0 + (12.0 * x).cos());
        assert!((tail_ratio(&u) - 0.5).abs() < 1e-12);
    }
}
