//! File formats and the experiment runner behind the `migsim` binary.
//!
//! The simulation itself lives in `migsim-core`; this crate reads profiles,
//! traces, plans and TOML configs, fans independent simulations out over a
//! thread pool, and writes reports.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;

pub use config::{ExperimentConfig, OUTPUT_ROOT_ENV};
pub use error::{CliError, ExitStatus, Result};
pub use experiment::{run_experiment, sweep, Experiment, RunOutcome};
