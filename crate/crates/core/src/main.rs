use std::process::ExitCode;

use clap::Parser;
use genbound::cli::{dispatch, Cli};
use genbound::rng::thread_cap;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = thread_cap() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match dispatch(cli) {
        Ok(summary) => {
            eprint!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
