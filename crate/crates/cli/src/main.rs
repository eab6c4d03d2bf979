//! `zsh` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid input or flags, 3 solver failure, 4 protocol violation.

mod args;
mod commands;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use zsh_core::ErrorKind;

use crate::args::Cli;

/// Every value-taking flag must be written `--name=value`.
fn command() -> clap::Command {
    fn equals(arg: clap::Arg) -> clap::Arg {
        if arg.get_action().takes_values() && arg.get_long().is_some() {
            arg.require_equals(true)
        } else {
            arg
        }
    }
    Cli::command().mut_args(equals).mut_subcommands(|sub| sub.mut_args(equals))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match command().try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.workers {
        Some(0) => {
            eprintln!("error: --workers: must be >= 1");
            return ExitCode::from(2);
        }
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: --workers: {e}");
            return ExitCode::from(2);
        }
    };

    match pool.install(|| commands::run(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(match f.kind {
                ErrorKind::Validation => 2,
                ErrorKind::Solver => 3,
                ErrorKind::Protocol => 4,
            })
        }
    }
}
