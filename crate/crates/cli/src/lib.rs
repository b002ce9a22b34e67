//! Command-line front end: file formats, report documents and the `idshield`
//! commands.

pub mod commands;
pub mod config;
pub mod dpcheck;
pub mod error;
pub mod formats;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

pub use commands::run;
pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { error::EXIT_USAGE } else { 0 };
        }
    };
    if config.resolve_seed() {
        eprintln!("no seed given; using default seed {}", config.seed());
    }
    match run(&config) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
