//! Run orchestration and file emission.
//!
//! Every output starts with `# config: <json>`. The trajectory and the
//! diagnostics stream are written and flushed record by record, so a long
//! run can be inspected while it is going; the diagnostics stream ends with
//! a status object describing how the run ended.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use nlburgers_core::diagnostics::{slice_times, spectrum_slices};
use nlburgers_core::integrators::evolve_with;
use nlburgers_core::{DiagnosticsConfig, DiagnosticsRecord, Field, Trajectory};

use crate::config::{ConfigError, Emit, RunConfig};

pub const CONFIG_PREFIX: &str = "# config: ";

/// Number of time slices in the spectra export.
pub const SPECTRUM_SLICES: usize = 10;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io { path: PathBuf, source: io::Error },
    Solver(nlburgers_core::NlbError),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            RunError::Solver(e) => write!(f, "solver error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<nlburgers_core::NlbError> for RunError {
    fn from(e: nlburgers_core::NlbError) -> Self {
        RunError::Solver(e)
    }
}

struct Sink {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Sink {
    fn create(dir: &Path, emit: Emit, header: &str) -> Result<Self, RunError> {
        let path = dir.join(emit.file_name());
        let io_err = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io_err)?);
        writeln!(out, "{CONFIG_PREFIX}{header}").map_err(io_err)?;
        Ok(Self { path, out })
    }

    fn line(&mut self, text: &str) -> io::Result<()> {
        writeln!(self.out, "{text}")
    }

    fn flush(&mut self) -> Result<(), RunError> {
        self.out.flush().map_err(|source| RunError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

fn csv_row(t: f64, values: &[f64]) -> String {
    let mut row = t.to_string();
    for v in values {
        row.push(',');
        row.push_str(&v.to_string());
    }
    row
}

/// Runs `cfg` (already resolved or not) and writes the requested files into
/// `cfg.out`. Guard trips are a normal outcome and are reported through the
/// returned trajectory's status.
pub fn run(cfg: &RunConfig) -> Result<Trajectory, RunError> {
    let cfg = cfg.clone().resolve()?;
    let header = cfg.to_json();
    fs::create_dir_all(&cfg.out).map_err(|source| RunError::Io {
        path: cfg.out.clone(),
        source,
    })?;
    let u0 = cfg.initial_data()?;
    let n = u0.len();

    let mut traj_sink = match cfg.emit.contains(&Emit::Trajectory) {
        true => {
            let mut s = Sink::create(&cfg.out, Emit::Trajectory, &header)?;
            let cols: Vec<String> = (0..n).map(|i| format!("x_{i}")).collect();
            s.line(&format!("t,{}", cols.join(",")))
                .map_err(|source| RunError::Io {
                    path: s.path.clone(),
                    source,
                })?;
            Some(s)
        }
        false => None,
    };
    let mut diag_sink = match cfg.emit.contains(&Emit::Diagnostics) {
        true => Some(Sink::create(&cfg.out, Emit::Diagnostics, &header)?),
        false => None,
    };

    let mut write_err: Option<RunError> = None;
    let observer = |u: &Field, rec: &DiagnosticsRecord| {
        if write_err.is_some() {
            return;
        }
        let emit = |sink: &mut Option<Sink>, line: String| {
            if let Some(s) = sink {
                if let Err(source) = s.line(&line) {
                    return Err(RunError::Io {
                        path: s.path.clone(),
                        source,
                    });
                }
                s.flush()?;
            }
            Ok(())
        };
        let res = emit(&mut traj_sink, csv_row(rec.t, u.values()))
            .and_then(|_| emit(&mut diag_sink, serde_json::to_string(rec).expect("record serializes")));
        if let Err(e) = res {
            write_err = Some(e);
        }
    };
    let diag = DiagnosticsConfig::new(cfg.spec());
    let traj = evolve_with(&u0, &cfg.control(), cfg.form(), &diag, observer)?;
    if let Some(e) = write_err {
        return Err(e);
    }

    if let Some(s) = diag_sink.as_mut() {
        let status = serde_json::to_string(&traj.end).expect("status serializes");
        s.line(&status).map_err(|source| RunError::Io {
            path: s.path.clone(),
            source,
        })?;
        s.flush()?;
    }
    if cfg.emit.contains(&Emit::Spectra) {
        let mut s = Sink::create(&cfg.out, Emit::Spectra, &header)?;
        let rows = spectrum_slices(&traj, &slice_times(&traj, SPECTRUM_SLICES))?;
        let mut text = String::from("t,k,abs_uhat\n");
        for r in rows {
            text.push_str(&format!("{},{},{}\n", r.t, r.k, r.abs_uhat));
        }
        s.out.write_all(text.as_bytes()).map_err(|source| RunError::Io {
            path: s.path.clone(),
            source,
        })?;
        s.flush()?;
    }
    Ok(traj)
}
