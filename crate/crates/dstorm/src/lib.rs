//! Experiment harness for `dstorm-core`: TOML configs, multi-seed sweeps with
//! CSV traces and summaries, JSON checkpoints, and plain-text import/export.

pub mod checkpoint;
pub mod config;
mod error;
pub mod io;
pub mod runner;
pub mod spectral;
pub mod trace;

pub use config::{parse_config, parse_config_str, ExperimentConfig, ExperimentSpec};
pub use error::{exit_code, HarnessError, Result};
