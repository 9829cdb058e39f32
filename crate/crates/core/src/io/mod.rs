//! Configuration files and output writers.

pub mod config;
pub mod output;

pub use config::{parse_config, parse_config_str, ExperimentConfig, PotentialInput};
pub use output::{write_json, write_timeseries, OutputLock};
