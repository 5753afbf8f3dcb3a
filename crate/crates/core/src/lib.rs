//! Tracking a walking person from the path length change rates (PLCR) of
//! several Wi-Fi links whose features are mostly missing because the links
//! carry traffic only a fraction of the time.
//!
//! The pipeline alternates two steps per time slot: the missing PLCRs of
//! the slot are predicted from carried-forward observations, from other
//! links, and from the trace so far; then the trace is extended and its
//! recent past refined from the completed row.

#![no_std]

extern crate alloc;

pub mod csi;
pub mod error;
pub mod geometry;
pub mod matrices;
pub mod metrics;
pub mod predict;
pub mod sim;
pub mod stap;
pub mod track;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
