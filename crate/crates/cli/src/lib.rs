//! Command-line front end of the STIRAP simulator: configuration, presets,
//! subcommands and their CSV/SVG artifacts.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

pub use commands::{run, Command, Report};
pub use config::{Preset, RunConfig};
