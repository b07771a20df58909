use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use torus_billiard_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = run(&cli, &mut out).and_then(|_| out.flush().map_err(|e| torus_billiard_cli::CliError::io("<stdout>", e)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
