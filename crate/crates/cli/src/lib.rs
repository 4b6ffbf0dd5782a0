//! Command-line harness: JSON run specifications in, CSV and JSON artifacts out.
//!
//! Artifacts written by `run`:
//!
//! - `convergence.csv`: `repetition,iteration,J,J_stderr,grad_norm,E_c,seed`
//! - `timing.csv`: `repetition,iteration,wall_ms`
//! - `control.csv`: `repetition,t,u_1..u_k[,ua_1..ua_k]`
//! - `summary.json`
//!
//! `compare` writes `compare.csv`: `spec,method,problem,final_E_c,final_J,mean_wall_ms,iterations`.

mod error;
mod run;
mod spec;

pub use error::CliError;
pub use run::{
    compare, output_dir, run, solve_spec, write_artifacts, RunReport, COMPARE_HEADER, CONVERGENCE_HEADER, TIMING_HEADER,
};
pub use spec::{load_spec, RunSpec, KEYS};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "MALGPRO_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Validation(format!("{THREADS_ENV}: {e}")))
}
