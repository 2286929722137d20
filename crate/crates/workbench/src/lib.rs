//! File formats, experiment configs and commands on top of `mfh-core`.
//!
//! Datasets travel as CSV, graphs as JSON or DOT, parameters and metrics
//! reports as JSON (reports also as flat CSV). An [`ExperimentConfig`] is a
//! single JSON document; the `mfh` binary maps its verbs onto the functions
//! in [`commands`].

pub mod commands;
pub mod config;
pub mod error;
pub mod graph_io;
pub mod params_io;
pub mod predictor;
pub mod report_io;
pub mod table;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
