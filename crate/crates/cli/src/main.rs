use std::process::ExitCode;

use clap::Parser;
use padic_ddr_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command, &cli.global) {
        Ok(report) => {
            println!("{}", report.render(cli.global.format));
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
