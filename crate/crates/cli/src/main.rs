use std::process::ExitCode;

use clap::Parser;
use lsc_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match lsc_cli::run(&cli) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
