//! Experiment harness for the review-aware rankers: configuration, the
//! ingest → features → train → evaluate pipeline and its artifacts.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{ExperimentConfig, InputFormat, TrainOverrides};
pub use error::{CliError, ExitStatus};
pub use pipeline::{recommend, run_experiment, Layout, RunArtifacts, Session};
