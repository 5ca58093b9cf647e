//! File formats and command implementations behind the `emla` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::Exit;
pub use config::{parse, ConfigError, ConfigErrors, ScenarioFile};
