//! Configuration, dataset I/O, reporting and the command-line front end for
//! the `etpa-lab` tool.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod report;

pub use cli::{execute, Cli, CliError, Command, Outcome};
pub use config::{ConfigError, Mode, RunConfig};
pub use dataset::{load_dataset, read_dataset, save_dataset, write_dataset, DatasetError};
pub use report::{emit_report, Format, Report, ReportError};
