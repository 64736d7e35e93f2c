use std::process::ExitCode;

use clap::Parser;
use raylength::{run, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    match RunConfig::resolve(kind, args).and_then(|cfg| run(&cfg)) {
        Ok(report) => {
            for p in &report.outputs {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
