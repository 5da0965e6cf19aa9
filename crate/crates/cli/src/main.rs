use std::process::ExitCode;

use clap::Parser;

use parafee_cli::{execute, Cli, OutputFormat};

// Exit codes: 0 all assertions pass, 1 assertion failure, 2 usage/input or
// module error.
fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(report) => {
            match cli.format {
                OutputFormat::Human => print!("{}", report.render_human()),
                OutputFormat::Json => println!("{}", report.to_json()),
                OutputFormat::Csv => print!("{}", report.primary_csv()),
            }
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
