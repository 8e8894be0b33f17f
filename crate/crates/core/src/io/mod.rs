//! Configuration, on-disk formats and end-to-end jobs.

pub mod checkpoint;
pub mod config;
pub mod manifest;
pub mod runner;
pub mod timeseries;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError};
pub use config::{
    load_config, load_config_with, parse_config, ConfigError, InitialData, RunConfig,
};
pub use manifest::{read_manifest, write_manifest, CompletionStatus, RunManifest};
pub use runner::RuntimeError;
pub use timeseries::{read_timeseries, write_timeseries, TimeseriesError};
