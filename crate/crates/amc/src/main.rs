use std::io;
use std::process::ExitCode;

use amc::cli::{self, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let args = Cli::parse();
    let stdout = io::stdout();
    match cli::run(args, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
