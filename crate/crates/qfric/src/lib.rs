//! Batch front-end for `qfric-core`.
//!
//! A run reads one TOML config, validates it completely, executes the selected
//! experiment and writes CSV tables, optional SVG charts and a `manifest.toml`.
//! All files are assembled in memory and written by a single writer, so outputs
//! do not depend on the number of worker threads.

// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod build;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

use std::path::Path;

pub use config::RunConfig;
pub use error::RunError;
pub use runner::{run, validate, RunReport, VERSION};

/// Reads and parses a config file.
pub fn load(path: &Path) -> Result<(RunConfig, Vec<u8>), RunError> {
    let raw = std::fs::read(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&raw).map_err(|_| RunError::Config("config is not valid UTF-8".into()))?;
    let cfg = RunConfig::parse(text)?;
    Ok((cfg, raw))
}

/// Loads, validates, runs and writes outputs for the config at `path`.
pub fn run_file(path: &Path, out: Option<&Path>) -> Result<RunReport, RunError> {
    let (cfg, raw) = load(path)?;
    run(&cfg, &raw, out)
}
