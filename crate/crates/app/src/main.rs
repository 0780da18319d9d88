use std::process::ExitCode;

use bkimap_app::cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    // clap exits with status 2 on malformed flags, matching "bad config"
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
