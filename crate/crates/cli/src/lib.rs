//! Configuration, execution and artifact output for the `qbc` binary.

pub mod config;
pub mod run;
pub mod svg;

pub use config::{emit, parse_config, ConfigError, ConfigIssue, Mode, Resolved, RunConfig};
pub use run::{execute, persist, Format, Manifest, Outcome, RunError};
