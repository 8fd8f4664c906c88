//! Configuration-driven harness around the `viscowave` solvers.
//!
//! A run reads one JSON config (see `CONFIG.md`), executes one command,
//! writes artifacts to an output directory, and maps the outcome to an exit
//! code: 0 success, 1 validation failure, 2 solver non-convergence, 3 config
//! error.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use run::{exit, run, RunError, RunSummary};
