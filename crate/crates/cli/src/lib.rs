//! Command-line front end for riffle-independent ranking models: ballot
//! files, model files, and the `riffle` subcommands.

pub mod ballots;
pub mod commands;
pub mod error;
pub mod model_file;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use commands::Cli;
pub use error::{CliError, CliResult};

/// Parses `args`, runs the command, and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("riffle: cannot start worker threads: {e}");
            return 2;
        }
    };
    match pool.install(|| commands::dispatch(&cli)) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return 2;
            }
            0
        }
        Err(e) => {
            eprintln!("riffle: {e}");
            e.exit_code()
        }
    }
}
