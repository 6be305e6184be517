//! Scenario runner and invariant verifier for the non-local Burgers solver.
//!
//! A run is described by a [`RunConfig`]; [`run::run`] integrates it and
//! writes plot-ready files, and [`verify::verify`] re-checks the structural
//! laws from those files alone.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod verify;

pub use config::{ConfigError, Emit, RunConfig};
pub use run::{run, RunError};
pub use verify::{all_passed, verify, LawReport, Verdict};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "NLB_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    if threads == 0 {
        return Err(format!("{THREADS_ENV} must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}
