//! Scene files, reports and the `raylength` command-line driver on top of
//! `raylength-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod scenefile;

pub use commands::{run, RunReport};
pub use config::{Cli, Command, CommandKind, RunArgs, RunConfig};
pub use error::{Result, ShellError};
pub use scenefile::{emit_scene, load_scene, parse_scene};
