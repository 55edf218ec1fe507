//! Named experiments, declarative configs and sweep execution.

pub mod config;
pub mod registry;
pub mod run;
pub mod verify;

pub use config::{ExperimentConfig, ExperimentName, Format, Parameters, Sweep};
pub use registry::{default_config, list_experiments, merged_config};
pub use run::{run_experiment, write_outputs, Metrics, RunOptions, SweepResult, SweepRow};
pub use verify::{verify, VerifyReport};
