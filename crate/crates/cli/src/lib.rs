//! Experiment orchestration for the `ddsound` command-line tool.
//!
//! An [`ExperimentSpec`] names one experiment kind plus its frame, channel,
//! impairments, estimator settings and seeds. [`run_experiment`] writes one
//! result directory holding per-output CSV files and a `manifest.json`.

pub mod bundle;
pub mod checks;
pub mod error;
pub mod experiment;
pub mod spec;
pub mod verbs;

pub use checks::Check;
pub use error::{CliError, CliResult};
pub use experiment::{run_experiment, RunSummary};
pub use spec::{ChannelSpec, ExperimentKind, ExperimentSpec, Impairments, SweepSpec, SCHEMA_VERSION};
