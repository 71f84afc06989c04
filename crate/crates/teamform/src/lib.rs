//! File formats, experiment execution and sweeps for the team formation
//! simulator. The `teamform` binary is a thin layer over this library.

pub mod batch;
pub mod config;
pub mod exec;
pub mod logfmt;
pub mod lowerbound;
pub mod replay;

pub use config::{ConfigError, Experiment, RunConfig};
pub use exec::{execute, MetricsRow, Options, Outcome, RunOutput};
