//! Command-line layer: configuration parsing, report and snapshot formats,
//! and the `check` / `simulate` / `reduce` commands.

pub mod commands;
pub mod config;
pub mod report;
pub mod snapshot;

pub use commands::{cmd_check, cmd_reduce, cmd_simulate, ExitCode, Overrides};
pub use config::{load_config, parse_config, ConfigError, Mode, SimulationSpec};
