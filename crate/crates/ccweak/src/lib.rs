//! File formats, configuration, experiment helpers and the command line
//! around `ccweak-core`.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod formats;
