//! Command-line experiment runner.

pub mod config;
pub mod experiment;
pub mod image_io;

pub use config::{ExperimentConfig, TargetMode};
pub use experiment::{exit_code, oracle_report, run_experiment, validate, ExperimentSummary, CSV_HEADER};
pub use image_io::write_image;
