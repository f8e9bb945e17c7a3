//! Command-line experiment harness: config parsing, the fold-by-fold
//! experiment runner, the spectral-ratio sweep, and dataset statistics.
//! Results land as CSV files with a header row and `.` decimals.

pub mod config;
pub mod experiment;
pub mod spectral_cmd;
pub mod stats_cmd;
