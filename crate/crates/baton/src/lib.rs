//! Harness around `baton-core`: TOML run configuration, CSV and binary file
//! formats, single runs with their artifacts, parameter sweeps and
//! predictor ablations.

pub mod config;
pub mod error;
pub mod formats;
pub mod harness;
pub mod report;

pub use config::{Overrides, RunConfig};
pub use error::{BatonError, Result};
