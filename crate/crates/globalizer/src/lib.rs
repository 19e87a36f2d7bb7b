//! File formats, configuration, timed pipeline runs and the command-line
//! front end for `globalizer-core`.

pub mod cli;
pub mod config;
pub mod formats;
pub mod report;
pub mod runner;

pub use config::PipelineConfig;
pub use runner::{run_stream, RunResult, StageTimings};
