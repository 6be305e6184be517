//! Explicit time stepping, CFL control, the blow-up guard and trajectory
//! assembly.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{tail_ratio, DiagnosticsConfig, DiagnosticsRecord, Recorder};
use crate::dynamics::{EquationForm, System};
use crate::error::{NlbError, Result};
use crate::grid::{Field, Grid};
use crate::kernels::KernelSpec;
use crate::operators::grad_spectral;

/// Step used when the CFL rule has nothing to bound (zero data).
pub const DEFAULT_TAU_MAX: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    #[default]
    Rk4,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
        }
    }

    /// Formal order of accuracy.
    pub fn order(self) -> u32 {
        match self {
            Scheme::Euler => 1,
            Scheme::Rk4 => 4,
        }
    }
}

/// Blow-up guard thresholds. The amplitude and gradient limits are relative
/// to the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardConfig {
    /// Trip when `|u|_inf > amplitude_factor * |u0|_inf`.
    pub amplitude_factor: f64,
    /// Trip when `|u_x|_inf > gradient_factor * max(|u0_x|_inf, |u0|_inf)`.
    pub gradient_factor: f64,
    /// Trip when the share of `sum |u_hat|` carried by `|k| > n/4` exceeds
    /// this value. Armed only once the ratio has been below it, so rough
    /// initial data does not trip at `t = 0`.
    pub tail_ratio: f64,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            amplitude_factor: 1e3,
            gradient_factor: 1e4,
            tail_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub scheme: Scheme,
    /// Fixed step; `None` selects the CFL rule at every step.
    pub tau: Option<f64>,
    pub safety: f64,
    pub tau_max: f64,
    pub t_end: f64,
    /// Store a state and diagnostics record every this many steps (the
    /// final state is always stored).
    pub record_every: usize,
    /// Hard cap on the number of steps; the run is aborted beyond it.
    pub max_steps: u64,
    pub guards: GuardConfig,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            tau: None,
            safety: 0.5,
            tau_max: DEFAULT_TAU_MAX,
            t_end: 1.0,
            record_every: 10,
            max_steps: 50_000_000,
            guards: GuardConfig::default(),
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NlbError::InvalidParameter(msg));
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return bad(format!("tau must be positive, got {tau}"));
            }
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad(format!("safety must lie in (0, 1], got {}", self.safety));
        }
        if !(self.tau_max > 0.0 && self.tau_max.is_finite()) {
            return bad(format!("tau_max must be positive, got {}", self.tau_max));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        let g = &self.guards;
        if !(g.amplitude_factor > 0.0 && g.gradient_factor > 0.0 && g.tail_ratio > 0.0) {
            return bad("guard thresholds must be positive".into());
        }
        Ok(())
    }
}

/// CFL step `safety / (|u|_inf * W * stiffness)`, capped at `tau_max`.
///
/// `W = delta sum_{j != 0} K_per(j delta)` is the total quadrature weight; it
/// already grows like `1/delta`, so the step scales like the mesh size.
pub fn cfl_step(u_inf: f64, weight: f64, stiffness: f64, safety: f64, tau_max: f64) -> f64 {
    if !(u_inf > 0.0) {
        return tau_max;
    }
    (safety / (u_inf * weight * stiffness)).min(tau_max)
}

/// CFL step of the quadrature form for the field `u`.
pub fn cfl_timestep(u: &Field, spec: &KernelSpec, safety: f64) -> f64 {
    let u_inf = u.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    cfl_step(u_inf, spec.quadrature_weight(&u.grid()), 1.0, safety, DEFAULT_TAU_MAX)
}

/// Reusable stage buffers for one system.
pub struct Stepper<'a> {
    sys: &'a System,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a System) -> Self {
        let len = sys.state_len();
        Self {
            sys,
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
        }
    }

    /// Advances `state` in place by one step of size `tau`.
    pub fn step(&mut self, scheme: Scheme, state: &mut [f64], tau: f64) -> Result<()> {
        let sys = self.sys;
        match scheme {
            Scheme::Euler => {
                sys.rhs(state, &mut self.k[0])?;
                for (s, k) in state.iter_mut().zip(&self.k[0]) {
                    *s += tau * k;
                }
            }
            Scheme::Rk4 => {
                let [k1, k2, k3, k4] = &mut self.k;
                let tmp = &mut self.tmp;
                sys.rhs(state, k1)?;
                stage(tmp, state, k1, 0.5 * tau);
                sys.rhs(tmp, k2)?;
                stage(tmp, state, k2, 0.5 * tau);
                sys.rhs(tmp, k3)?;
                stage(tmp, state, k3, tau);
                sys.rhs(tmp, k4)?;
                let w = tau / 6.0;
                for i in 0..state.len() {
                    state[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        Ok(())
    }
}

fn stage(out: &mut [f64], base: &[f64], slope: &[f64], h: f64) {
    for ((o, b), s) in out.iter_mut().zip(base).zip(slope) {
        *o = b + h * s;
    }
}

/// One step of `scheme` for the physical field `u` under `form`.
pub fn step(u: &Field, tau: f64, form: EquationForm, spec: KernelSpec, scheme: Scheme) -> Result<Field> {
    let sys = System::new(u.grid(), form, spec);
    let mut state = sys.init_state(u)?;
    Stepper::new(&sys).step(scheme, &mut state, tau)?;
    Field::new(u.grid(), sys.physical(&state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowupDetected,
    Aborted,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::BlowupDetected => "blowup_detected",
            RunStatus::Aborted => "aborted",
        }
    }
}

/// Settings a trajectory was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub n: usize,
    pub form: EquationForm,
    pub spec: KernelSpec,
    pub control: StepControl,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEnd {
    pub status: RunStatus,
    /// Time reached (the guard-trip time for blow-up runs).
    pub t: f64,
    pub reason: Option<String>,
    pub steps: u64,
    pub max_tau: f64,
    pub min_tau: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub records: Vec<DiagnosticsRecord>,
    pub status: RunStatus,
    pub end: RunEnd,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn grid(&self) -> Grid {
        self.states[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &Field {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn last_record(&self) -> &DiagnosticsRecord {
        self.records.last().expect("trajectory holds the initial record")
    }

    /// Bridging constant between the momentum rate and `||u||^2_{H^{1/2}}`
    /// for the form that produced the run.
    pub fn bridging(&self) -> f64 {
        if self.meta.form.uses_quadrature() {
            self.meta.spec.bridging()
        } else {
            1.0
        }
    }
}

struct Guard {
    amp_limit: f64,
    grad_limit: f64,
    tail_limit: f64,
    tail_armed: bool,
}

impl Guard {
    fn new(u0: &Field, cfg: &GuardConfig) -> Self {
        let u_inf = max_abs(u0.values());
        let grad0 = max_abs(grad_spectral(u0).values());
        let tail_limit = cfg.tail_ratio;
        Self {
            amp_limit: cfg.amplitude_factor * u_inf.max(f64::MIN_POSITIVE),
            grad_limit: cfg.gradient_factor * grad0.max(u_inf).max(f64::MIN_POSITIVE),
            tail_limit,
            tail_armed: tail_ratio(u0) < tail_limit,
        }
    }

    fn check(&mut self, u: &Field) -> Option<String> {
        let u_inf = max_abs(u.values());
        if u_inf > self.amp_limit {
            return Some(format!("amplitude {u_inf:e} exceeds {:e}", self.amp_limit));
        }
        let grad = max_abs(grad_spectral(u).values());
        if grad > self.grad_limit {
            return Some(format!("gradient {grad:e} exceeds {:e}", self.grad_limit));
        }
        let tail = tail_ratio(u);
        if self.tail_armed && tail > self.tail_limit {
            return Some(format!("spectral tail ratio {tail:.3} exceeds {}", self.tail_limit));
        }
        if tail < self.tail_limit {
            self.tail_armed = true;
        }
        None
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Integrates `u0` to `ctrl.t_end` with default diagnostics.
pub fn evolve(u0: &Field, ctrl: &StepControl, form: EquationForm, spec: KernelSpec) -> Result<Trajectory> {
    evolve_with(u0, ctrl, form, &DiagnosticsConfig::new(spec), |_, _| {})
}

/// Integrates `u0`, calling `observer` on every stored state as soon as its
/// record is computed.
pub fn evolve_with(
    u0: &Field,
    ctrl: &StepControl,
    form: EquationForm,
    diag: &DiagnosticsConfig,
    mut observer: impl FnMut(&Field, &DiagnosticsRecord),
) -> Result<Trajectory> {
    ctrl.validate()?;
    let grid = u0.grid();
    let spec = diag.spec;
    let sys = System::new(grid, form, spec);
    let mut state = sys.init_state(u0)?;
    let recorder = Recorder::new(grid, diag.clone())?;
    let weight = spec.quadrature_weight(&grid);
    let stiffness = sys.stiffness();
    let mut guard = Guard::new(u0, &ctrl.guards);
    let mut stepper = Stepper::new(&sys);

    let first = recorder.record(u0, 0.0, None)?;
    observer(u0, &first);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![u0.clone()],
        records: vec![first],
        status: RunStatus::Completed,
        end: RunEnd {
            status: RunStatus::Completed,
            t: 0.0,
            reason: None,
            steps: 0,
            max_tau: 0.0,
            min_tau: f64::INFINITY,
        },
        meta: TrajectoryMeta {
            n: grid.n(),
            form,
            spec,
            control: ctrl.clone(),
        },
    };

    let mut t = 0.0;
    let mut steps: u64 = 0;
    let mut phys = u0.values().to_vec();
    let finish = |traj: &mut Trajectory, status, t, reason, steps| {
        traj.status = status;
        traj.end.status = status;
        traj.end.t = t;
        traj.end.reason = reason;
        traj.end.steps = steps;
    };

    loop {
        if steps >= ctrl.max_steps {
            let reason = format!("step limit {} reached", ctrl.max_steps);
            finish(&mut traj, RunStatus::Aborted, t, Some(reason), steps);
            break;
        }
        let mut tau = match ctrl.tau {
            Some(tau) => tau,
            None => cfl_step(max_abs(&phys), weight, stiffness, ctrl.safety, ctrl.tau_max),
        };
        let remaining = ctrl.t_end - t;
        let last = tau >= remaining * (1.0 - 1e-12);
        if last {
            tau = remaining;
        }

        if let Err(err) = stepper.step(ctrl.scheme, &mut state, tau) {
            let status = match err {
                NlbError::NotPositive { .. } | NlbError::NonFinite { .. } => RunStatus::BlowupDetected,
                _ => RunStatus::Aborted,
            };
            finish(&mut traj, status, t, Some(err.to_string()), steps);
            break;
        }
        steps += 1;
        t = if last { ctrl.t_end } else { t + tau };
        traj.end.max_tau = traj.end.max_tau.max(tau);
        traj.end.min_tau = traj.end.min_tau.min(tau);
        phys = sys.physical(&state);

        let u = match Field::new(grid, phys.clone()) {
            Ok(u) => u,
            Err(err) => {
                finish(&mut traj, RunStatus::BlowupDetected, t, Some(err.to_string()), steps);
                break;
            }
        };
        let tripped = guard.check(&u);
        if tripped.is_some() || last || steps.is_multiple_of(ctrl.record_every as u64) {
            let rec = recorder.record(&u, t, traj.records.last())?;
            observer(&u, &rec);
            traj.times.push(t);
            traj.states.push(u);
            traj.records.push(rec);
        }
        if let Some(reason) = tripped {
            finish(&mut traj, RunStatus::BlowupDetected, t, Some(reason), steps);
            break;
        }
        if last {
            finish(&mut traj, RunStatus::Completed, t, None, steps);
            break;
        }
    }
    if traj.end.min_tau.is_infinite() {
        traj.end.min_tau = 0.0;
    }
    Ok(traj)
}
