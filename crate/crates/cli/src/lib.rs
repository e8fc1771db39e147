//! Configuration, dataset IO and mode dispatch for the `defer-lab` binary.

pub mod config;
pub mod dataset;
pub mod error;
pub mod run;

use std::path::PathBuf;

pub use config::{parse_config, Mode, RunConfig};
pub use dataset::{load_dataset, write_dataset, Dataset};
pub use error::{CliError, Result};
pub use run::{run, RunSummary};

/// Environment variable capping the worker thread count.
pub const THREADS_VAR: &str = "DEFER_LAB_THREADS";

/// Size the global worker pool from [`THREADS_VAR`], if set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Environment(format!("{THREADS_VAR}={raw:?} is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Environment(e.to_string()))
}

/// Load `config`, apply command-line overrides and run `mode`.
pub fn execute(
    mode: Mode,
    config: &std::path::Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<RunSummary> {
    let mut cfg = parse_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    run(mode, &cfg)
}
