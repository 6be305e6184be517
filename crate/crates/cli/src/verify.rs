//! Re-checks the structural laws on the files of a finished run.

use std::fs;
use std::path::Path;

use nlburgers_core::diagnostics::{energy_drift, extrema_trend, fit_decay, hp_balance, momentum_law, DecayQuantity};
use nlburgers_core::dynamics::fem_assemble;
use nlburgers_core::integrators::{RunEnd, TrajectoryMeta};
use nlburgers_core::{DiagnosticsRecord, EquationForm, Field, RunStatus, Trajectory};
use serde::Serialize;

use crate::config::{Emit, RunConfig};
use crate::run::CONFIG_PREFIX;

/// Relative drift allowed for the conserved energy.
pub const ENERGY_TOL: f64 = 1e-6;
/// Per-interval momentum-law residual relative to the total gain. The
/// trapezoid rule over record intervals bounds how small this can be.
pub const MOMENTUM_TOL: f64 = 1e-2;
/// Absolute momentum drift allowed for the frozen model.
pub const FROZEN_MOMENTUM_TOL: f64 = 1e-10;
/// Absolute floor below which residuals count as exact.
pub const EXACT_TOL: f64 = 1e-12;
/// Relative `L^p` balance residual for forms driven by the quadrature. As
/// for the momentum law, the time integral only sees recorded states.
pub const HP_TOL_QUADRATURE: f64 = 1e-2;
/// The spectral and FEM forms match the quadrature dissipation only to
/// leading order in the mesh size.
pub const HP_TOL_CONSISTENT: f64 = 5e-2;
pub const DECAY_MIN_R2: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawReport {
    pub law: String,
    pub status: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl LawReport {
    fn judged(law: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self {
            law: law.into(),
            status: if value <= tolerance {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            value: Some(value),
            tolerance: Some(tolerance),
            detail,
        }
    }

    fn verdict(law: &str, status: Verdict, detail: impl Into<String>) -> Self {
        Self {
            law: law.into(),
            status,
            value: None,
            tolerance: None,
            detail: detail.into(),
        }
    }

    fn na(law: &str, detail: impl Into<String>) -> Self {
        Self::verdict(law, Verdict::NotApplicable, detail)
    }
}

/// Files of a run directory, parsed.
struct RunFiles {
    config: Option<RunConfig>,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    records: Vec<DiagnosticsRecord>,
    end: Option<RunEnd>,
}

fn split_header<'a>(text: &'a str, name: &str) -> Result<(RunConfig, std::str::Lines<'a>), String> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    let json = first
        .strip_prefix(CONFIG_PREFIX)
        .ok_or_else(|| format!("{name}: first line is not a config header"))?;
    let cfg = RunConfig::from_json(json, name).map_err(|e| e.to_string())?;
    Ok((cfg, lines))
}

fn parse_trajectory(text: &str, files: &mut RunFiles) -> Result<(), String> {
    let name = Emit::Trajectory.file_name();
    let (cfg, mut lines) = split_header(text, name)?;
    files.config.get_or_insert(cfg);
    lines.next().ok_or_else(|| format!("{name}: missing column header"))?;
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{name}:{}: {e}", i + 3))?;
        let (t, values) = row
            .split_first()
            .ok_or_else(|| format!("{name}:{}: empty row", i + 3))?;
        files.times.push(*t);
        files.states.push(values.to_vec());
    }
    Ok(())
}

fn parse_diagnostics(text: &str, files: &mut RunFiles) -> Result<(), String> {
    let name = Emit::Diagnostics.file_name();
    let (cfg, lines) = split_header(text, name)?;
    files.config.get_or_insert(cfg);
    for (i, line) in lines.enumerate() {
        let at = |e: serde_json::Error| format!("{name}:{}: {e}", i + 2);
        let value: serde_json::Value = serde_json::from_str(line).map_err(at)?;
        if value.get("status").is_some() {
            files.end = Some(serde_json::from_value(value).map_err(at)?);
        } else {
            files.records.push(serde_json::from_value(value).map_err(at)?);
        }
    }
    Ok(())
}

/// Reads `dir` and returns one report per law plus one per problem file.
pub fn verify(dir: &Path) -> Vec<LawReport> {
    let mut reports = Vec::new();
    let mut files = RunFiles {
        config: None,
        times: Vec::new(),
        states: Vec::new(),
        records: Vec::new(),
        end: None,
    };
    let have = |emit: Emit, reports: &mut Vec<LawReport>| -> Option<String> {
        let path = dir.join(emit.file_name());
        match fs::read_to_string(&path) {
            Ok(text) => Some(text),
            Err(e) => {
                reports.push(LawReport::verdict(
                    &format!("file:{}", emit.file_name()),
                    Verdict::Missing,
                    format!("{}: {e}", path.display()),
                ));
                None
            }
        }
    };
    let diag_text = have(Emit::Diagnostics, &mut reports);
    let traj_text = have(Emit::Trajectory, &mut reports);
    let parsed = [
        (
            Emit::Diagnostics,
            diag_text.as_deref(),
            parse_diagnostics as fn(&str, &mut RunFiles) -> _,
        ),
        (Emit::Trajectory, traj_text.as_deref(), parse_trajectory),
    ];
    for (emit, text, parse) in parsed {
        if let Some(Err(e)) = text.map(|t| parse(t, &mut files)) {
            reports.push(LawReport::verdict(
                &format!("file:{}", emit.file_name()),
                Verdict::Fail,
                e,
            ));
        }
    }
    if reports.iter().any(|r| r.status == Verdict::Fail) {
        return reports;
    }
    let Some(cfg) = files.config.take() else {
        return reports;
    };
    if files.records.is_empty() {
        reports.push(LawReport::na("all", "no diagnostics records to check"));
        return reports;
    }
    match assemble(&cfg, files) {
        Ok(traj) => reports.extend(check_laws(&traj)),
        Err(e) => reports.push(LawReport::verdict("file:trajectory.csv", Verdict::Fail, e)),
    }
    reports
}

fn assemble(cfg: &RunConfig, files: RunFiles) -> Result<Trajectory, String> {
    let grid = cfg.grid().map_err(|e| e.to_string())?;
    let states = files
        .states
        .into_iter()
        .map(|v| Field::new(grid, v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    if !states.is_empty() && states.len() != files.records.len() {
        return Err(format!(
            "{} states but {} diagnostics records",
            states.len(),
            files.records.len()
        ));
    }
    let end = files.end.unwrap_or(RunEnd {
        status: RunStatus::Aborted,
        t: files.records.last().map_or(0.0, |r| r.t),
        reason: Some("diagnostics stream has no status line".into()),
        steps: 0,
        max_tau: 0.0,
        min_tau: 0.0,
    });
    let times = if states.is_empty() {
        files.records.iter().map(|r| r.t).collect()
    } else {
        files.times
    };
    Ok(Trajectory {
        times,
        states,
        records: files.records,
        status: end.status,
        end,
        meta: TrajectoryMeta {
            n: grid.n(),
            form: cfg.form(),
            spec: cfg.spec(),
            control: cfg.control(),
        },
    })
}

fn check_laws(traj: &Trajectory) -> Vec<LawReport> {
    let mut out = vec![LawReport::verdict(
        "status",
        Verdict::Pass,
        format!("{} at t = {}", traj.status.name(), traj.end.t),
    )];
    out.push(energy(traj));
    out.push(momentum(traj));
    out.extend(extrema(traj));
    out.push(higher_lp(traj));
    out.push(decay(traj));
    out.push(bkm(traj));
    out
}

fn err(law: &str, e: impl std::fmt::Display) -> LawReport {
    LawReport::verdict(law, Verdict::Fail, e.to_string())
}

fn has_states(traj: &Trajectory) -> bool {
    !traj.states.is_empty()
}

fn energy(traj: &Trajectory) -> LawReport {
    const LAW: &str = "E";
    if traj.meta.form == EquationForm::Fem {
        if !has_states(traj) {
            return LawReport::na(LAW, "FEM energy needs the trajectory file");
        }
        let fem = fem_assemble(traj.grid());
        let e: Vec<f64> = traj.states.iter().map(|u| fem.energy(u.values())).collect();
        let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max) / e[0].max(f64::MIN_POSITIVE);
        return LawReport::judged(LAW, drift, ENERGY_TOL, "relative drift of U^T A U".into());
    }
    match energy_drift(traj) {
        Ok(d) => LawReport::judged(LAW, d, ENERGY_TOL, "relative drift of ||u||_2".into()),
        Err(e) => err(LAW, e),
    }
}

fn momentum(traj: &Trajectory) -> LawReport {
    const LAW: &str = "ML";
    let recs = &traj.records;
    if !traj.meta.form.is_full_equation() {
        let m0 = recs[0].momentum;
        let drift = recs.iter().map(|r| (r.momentum - m0).abs()).fold(0.0, f64::max);
        return LawReport::judged(LAW, drift, FROZEN_MOMENTUM_TOL, "momentum drift (frozen mean)".into());
    }
    if recs.len() < 2 {
        return LawReport::na(LAW, "fewer than two records");
    }
    match momentum_law(traj) {
        Ok(law) if law.total_gain.abs() <= EXACT_TOL => LawReport::judged(
            LAW,
            law.max_residual,
            EXACT_TOL,
            "absolute residual (no momentum gain)".into(),
        ),
        Ok(law) => LawReport::judged(
            LAW,
            law.max_residual / law.total_gain.abs(),
            MOMENTUM_TOL,
            format!("max interval residual / gain {:.6e}", law.total_gain),
        ),
        Err(e) => err(LAW, e),
    }
}

fn extrema(traj: &Trajectory) -> [LawReport; 2] {
    let first = &traj.records[0];
    let trend = match extrema_trend(traj) {
        Ok(t) => t,
        Err(e) => return [err("MP", &e), err("AMP", &e)],
    };
    let tau = traj.end.max_tau;
    let scale = first.min.abs().max(first.max.abs());
    let tol = 10.0 * tau * tau * scale + EXACT_TOL * scale;
    if first.min > 0.0 {
        let worst = trend.max_rise.max(trend.min_drop);
        [
            LawReport::judged("MP", worst, tol, "largest rise of max / drop of min".into()),
            LawReport::na("AMP", "data is positive"),
        ]
    } else if first.max < 0.0 {
        let worst = trend.max_drop.max(trend.min_rise);
        [
            LawReport::na("MP", "data is negative"),
            LawReport::judged("AMP", worst, tol, "largest drop of max / rise of min".into()),
        ]
    } else {
        [
            LawReport::na("MP", "data changes sign"),
            LawReport::na("AMP", "data changes sign"),
        ]
    }
}

fn higher_lp(traj: &Trajectory) -> LawReport {
    const LAW: &str = "HP";
    const P: f64 = 4.0;
    if !traj.meta.form.is_full_equation() {
        return LawReport::na(LAW, "balance holds for the full equation only");
    }
    if !has_states(traj) {
        return LawReport::na(LAW, "balance needs the trajectory file");
    }
    let tol = match traj.meta.form {
        EquationForm::UQuadrature | EquationForm::WSymmetrized => HP_TOL_QUADRATURE,
        _ => HP_TOL_CONSISTENT,
    };
    match hp_balance(traj, P) {
        Ok(b) if b.norms_nonincreasing == Some(false) => LawReport {
            law: LAW.into(),
            status: Verdict::Fail,
            value: Some(b.relative),
            tolerance: Some(tol),
            detail: format!("||u||_{P} increased on positive data"),
        },
        Ok(b) => LawReport::judged(LAW, b.relative, tol, format!("relative residual, p = {P}")),
        Err(e) => err(LAW, e),
    }
}

fn decay(traj: &Trajectory) -> LawReport {
    const LAW: &str = "decay";
    let first = &traj.records[0];
    if !(first.min > 0.0) || !traj.meta.form.is_full_equation() {
        return LawReport::na(LAW, "exponential decay is established for positive data");
    }
    if traj.status != RunStatus::Completed {
        return LawReport::na(LAW, "run did not complete");
    }
    match fit_decay(traj, None, DecayQuantity::Amplitude) {
        Ok(fit) => LawReport {
            law: LAW.into(),
            status: if fit.rate < 0.0 && fit.r_squared > DECAY_MIN_R2 {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            value: Some(fit.rate),
            tolerance: None,
            detail: format!(
                "amplitude rate on [{:.4}, {:.4}], r^2 = {:.6}",
                fit.window.0, fit.window.1, fit.r_squared
            ),
        },
        Err(e) => LawReport::na(LAW, format!("no fit window: {e}")),
    }
}

fn bkm(traj: &Trajectory) -> LawReport {
    const LAW: &str = "BKM";
    let recs = &traj.records;
    let mut acc = recs[0].bkm_acc;
    let mut worst = acc.abs();
    let mut monotone = true;
    for w in recs.windows(2) {
        acc += 0.5 * (w[1].t - w[0].t) * (w[1].grad_inf + w[0].grad_inf);
        worst = worst.max((acc - w[1].bkm_acc).abs());
        monotone &= w[1].bkm_acc >= w[0].bkm_acc;
    }
    let end = recs.last().map_or(0.0, |r| r.bkm_acc);
    let tol = 1e-9 * end.max(1.0);
    let mut report = LawReport::judged(
        LAW,
        worst,
        tol,
        format!("accumulator vs trapezoid of |u_x|_inf; int = {end:.6e}"),
    );
    if !monotone {
        report.status = Verdict::Fail;
        report.detail.push_str("; accumulator decreased");
    }
    report
}

/// True when no report failed or is missing.
pub fn all_passed(reports: &[LawReport]) -> bool {
    reports
        .iter()
        .all(|r| matches!(r.status, Verdict::Pass | Verdict::NotApplicable))
}
