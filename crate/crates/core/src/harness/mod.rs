//! Configuration, orchestration, report persistence and plot emission
//! behind the `fracstab` command.

pub mod config;
pub mod plots;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Suite};
pub use plots::{emit_plots, PlotOutput};
pub use report::{ExperimentReport, Payload};
pub use run::{cache_dir, execute, run_config, run_with_cache, RunOutcome, CACHE_ENV};
