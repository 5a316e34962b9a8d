//! Configuration, CSV output and run manifests.

pub mod config;
pub mod csv;
pub mod manifest;

pub use config::{
    parse_config, parse_config_str, ConfigError, ExperimentSection, OutputConfig, RunConfig,
};
pub use csv::{
    read_time_series, write_time_series, TimeSeriesRow, TimeSeriesWriter, TIME_SERIES_COLUMNS,
};
pub use manifest::{manifest_config, Manifest, CODE_VERSION};
