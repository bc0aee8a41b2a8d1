//! Runtime companion of `wfcpl-core`: TOML configuration, the framed
//! transport (in-process pipes or TCP), the heat experiments and their CSV
//! output. The `wfcpl` binary is a thin command line layer over this crate.

pub mod config;
mod error;
pub mod experiments;
pub mod transport;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
