//! Configuration, trace files and experiment drivers for the `dstep` tool.

pub mod config;
pub mod error;
pub mod experiments;
pub mod seeding;
pub mod tracefile;

pub use config::{ExperimentConfig, ResolvedExperiment};
pub use error::{CliError, Result};
