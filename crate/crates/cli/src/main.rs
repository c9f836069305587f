use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use coherence_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(&cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code() as u8;
            match e {
                CliError::Validation(msg) => eprintln!("error: {msg}"),
                CliError::NoConvergence { output, message } => {
                    let _ = stdout.write_all(output.as_bytes());
                    eprintln!("error: {message}");
                }
            }
            ExitCode::from(code)
        }
    }
}
