//! Command-line front end: `gcd`, `annotate`, `layers` and `average`.
//!
//! Each command writes one JSON report. [`run`] returns the report after
//! writing it so callers can inspect the result without re-reading the file.

mod args;
mod commands;
mod common;
mod error;

pub use args::{AnnotateArgs, AverageArgs, Cli, Command, EmbeddingArgs, GcdArgs, GcdMethod, LayersArgs, ModeArg};
pub use error::CliError;

use lsc_core::dataio::{write_report, Report};

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let (report, out) = match &cli.command {
        Command::Gcd(a) => (commands::gcd::run(a)?, &a.out),
        Command::Annotate(a) => (commands::annotate::run(a)?, &a.out),
        Command::Layers(a) => (commands::layers::run(a)?, &a.out),
        Command::Average(a) => (commands::average::run(a)?, &a.out),
    };
    write_report(&report, out)?;
    Ok(report)
}
