//! Command-line driver for the `ubauc` solvers: `train`, `eval`, `grid` and
//! `bench`. Every command is also callable as a function returning the
//! report it writes.

pub mod alloc;
pub mod args;
pub mod commands;
pub mod failure;
pub mod pipeline;

use args::{Cli, Command};
use failure::CliResult;

/// Runs one parsed command; reports are written to the paths in its args.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => commands::cmd_train(a).map(drop),
        Command::Eval(a) => commands::cmd_eval(a).map(drop),
        Command::Grid(a) => commands::cmd_grid(a).map(drop),
        Command::Bench(a) => commands::cmd_bench(a).map(drop),
    }
}
