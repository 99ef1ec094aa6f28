//! `smf`: register projects, fetch their history and tracker data, run
//! metric scripts over every released version, and export or analyze the
//! results.
//!
//! Exit codes: 0 success, 1 internal error, 2 bad arguments or unknown
//! project, 3 VCS failure / nothing selected / store missing, 4 tracker
//! failure, 5 admission criteria not met.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use log::LevelFilter;

use args::{Cli, Command};
use commands::Globals;

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => LevelFilter::Error,
        1 => LevelFilter::Info,
        2 => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| writeln!(buf, "{}: {}", record.level().as_str().to_lowercase(), record.args()))
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbosity);
    let globals = Globals {
        registry: cli.registry,
        store: cli.store,
        verbosity: cli.verbosity,
    };
    let result = match cli.command {
        Command::AddProject(a) => commands::add_project(&globals, a),
        Command::ValidateProject(a) => commands::validate_project(&globals, a),
        Command::FetchProject(a) => commands::fetch_project(&globals, a),
        Command::RunMetric(a) => commands::run_metric(&globals, a),
        Command::Export(a) => commands::export(&globals, a),
        Command::Analyze(a) => commands::analyze(&globals, a),
        Command::Dump(a) => commands::dump(&globals, a),
        Command::Load(a) => commands::load(&globals, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
