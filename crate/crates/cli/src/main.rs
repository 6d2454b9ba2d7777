mod args;
mod commands;
mod exit;
mod output;
mod validate;

use clap::Parser;

use crate::args::{merge_config, Cli, Command};
use crate::exit::{CliError, ExitCode};

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn dispatch() -> Result<ExitCode, CliError> {
    let argv = merge_config(std::env::args().collect()).map_err(CliError::usage)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // help and version
            print!("{e}");
            return Ok(ExitCode::Ok);
        }
        Err(e) => {
            eprint!("{e}");
            return Ok(ExitCode::Usage);
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match &cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Stability(a) => commands::stability(a),
        Command::Validate(a) => validate::validate(a),
    }
}

fn main() {
    let code = dispatch().unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.code
    });
    std::process::exit(code as i32);
}
