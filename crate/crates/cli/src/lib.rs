//! Experiment runner for `finmc`: flat key-value configs, single runs with
//! checksummed manifests, checkpoint resume, and parameter sweeps.

pub mod config;
pub mod error;
pub mod run;
pub mod sweep;

pub use config::RunConfig;
pub use error::{CliError, ErrorKind, ErrorRecord, Result};
pub use run::{generate, resume_experiment, run_experiment, RunManifest, RunStatus};
pub use sweep::{sweep, CompletedRun, ParameterGrid, SweepReport};
