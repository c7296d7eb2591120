use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match clab_cli::run(clab_cli::Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.headline);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("check failed; see summary.json");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
