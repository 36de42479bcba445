use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = pcb_cli::Cli::parse();
    let stdout = std::io::stdout();
    match pcb_cli::run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", pcb_cli::error_json(&e));
            ExitCode::FAILURE
        }
    }
}
