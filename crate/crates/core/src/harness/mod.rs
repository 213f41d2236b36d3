//! Batch experiments, CSV output, SVG plots and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod plot;
pub mod stats;

pub use cli::cli_entry;
pub use config::{Algorithm, DesignChoice, ExperimentConfig};
pub use experiment::{run_experiment, run_trials, AggregateRow, TrialRow};
pub use plot::emit_plots;
