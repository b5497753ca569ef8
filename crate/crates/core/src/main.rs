use std::process::ExitCode;

use clap::Parser;
use treegibbs::cli::{emit, error_json, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|outcome| {
        emit(&outcome, cli.out.as_deref())?;
        Ok(outcome.pass)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprint!("{}", error_json(&e));
            ExitCode::from(2)
        }
    }
}
