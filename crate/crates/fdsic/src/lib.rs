//! Experiment harness for the full-duplex cancellers.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

pub use config::{ConfigError, Experiment, RunConfig, Source};
pub use experiments::run;
pub use report::{Check, Report, Table};
