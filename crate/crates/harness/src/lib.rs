//! Experiment driver for `graphprop-core`: file formats, configuration,
//! the desk-scale studies and result persistence. The `graphprop` binary is a
//! thin shell over [`run::run_experiment`] and [`run::write_outputs`].

pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod results;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};
pub use run::{run_experiment, write_outputs, ExperimentOutput};
