//! Command-line front end for `robclust-core`.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod report;

use args::{Cli, Command};
use error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Fit(a) => commands::fit(a, "fit"),
        Command::Path(a) => commands::fit(a, "path"),
        Command::Eval(a) => commands::eval(a),
    }
}
