use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlburgers_cli::{all_passed, init_threads, run, verify, Emit, RunConfig};
use nlburgers_core::scenarios::PRESETS;
use nlburgers_core::{EquationForm, KernelMode, Scheme};

#[derive(Parser)]
#[command(name = "nlburgers", version, about = "Non-local Burgers equation on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write trajectory, diagnostics and spectra.
    Run(RunArgs),
    /// Check every monitored law on the files of a finished run.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
    /// List the named scenarios.
    Presets,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Preset name, `expr:<formula in x>`, or a JSON config file.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    #[arg(long, value_parser = parse_form)]
    form: Option<EquationForm>,
    #[arg(long, value_parser = parse_mode)]
    kernel_mode: Option<KernelMode>,
    /// Fixed time step (default: CFL rule).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    safety: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    /// Comma-separated subset of trajectory,diagnostics,spectra.
    #[arg(long, value_delimiter = ',', value_parser = parse_emit)]
    emit: Option<Vec<Emit>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    parse_json(s)
}

fn parse_form(s: &str) -> Result<EquationForm, String> {
    EquationForm::parse(s).ok_or_else(|| format!("unknown form {s:?}"))
}

fn parse_mode(s: &str) -> Result<KernelMode, String> {
    parse_json(s)
}

fn parse_emit(s: &str) -> Result<Emit, String> {
    parse_json(s)
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, String> {
        let mut cfg = match &self.scenario {
            Some(s) if s.ends_with(".json") || Path::new(s).is_file() => {
                RunConfig::from_file(Path::new(s)).map_err(|e| e.to_string())?
            }
            Some(s) => RunConfig {
                scenario: s.clone(),
                ..RunConfig::default()
            },
            None => RunConfig::default(),
        };
        cfg.n = self.n.or(cfg.n);
        cfg.t_end = self.t_end.or(cfg.t_end);
        cfg.form = self.form.or(cfg.form);
        cfg.tau = self.tau.or(cfg.tau);
        if let Some(v) = self.scheme {
            cfg.scheme = v;
        }
        if let Some(v) = self.kernel_mode {
            cfg.kernel_mode = v;
        }
        if let Some(v) = self.safety {
            cfg.safety = v;
        }
        if let Some(v) = self.record_every {
            cfg.record_every = v;
        }
        if let Some(v) = self.emit {
            cfg.emit = v.into_iter().collect();
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Run(args) => {
            let cfg = match args.into_config() {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run(&cfg) {
                Ok(traj) => {
                    let end = &traj.end;
                    println!(
                        "{} at t = {} after {} steps{}",
                        end.status.name(),
                        end.t,
                        end.steps,
                        end.reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Verify { run } => {
            let reports = verify(&run);
            for r in &reports {
                println!("{}", serde_json::to_string(r).expect("report serializes"));
            }
            if all_passed(&reports) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Presets => {
            for p in PRESETS {
                println!(
                    "{:<18} n={:<4} t_end={:<4} form={:<12} u0 = {}",
                    p.name,
                    p.n,
                    p.t_end,
                    p.form.name(),
                    p.formula
                );
            }
            ExitCode::SUCCESS
        }
    }
}
