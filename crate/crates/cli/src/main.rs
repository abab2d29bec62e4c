mod args;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use commands::Globals;
use error::{CliError, Result};

fn usage_exit(e: clap::Error) -> i32 {
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
        _ => 1,
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let g = Globals {
        seed: cli.seed,
        out: cli.out.clone(),
    };
    log::debug!("running {}", cli.command.name());
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&g, a),
        Command::Estimate(a) => commands::estimate(&g, a),
        Command::PerProblem(a) => commands::per_problem(&g, a),
        Command::SweepEvidence(a) => commands::sweep_evidence(&g, a),
        Command::AblateNoise(a) => commands::ablate_noise(&g, a),
        Command::AblateK(a) => commands::ablate_k(&g, a),
        Command::Multistep(a) => commands::multistep(&g, a),
        Command::Identifiability(a) => commands::identifiability(&g, a),
        Command::Calibrate(a) => commands::calibrate(&g, a),
        Command::Filter(a) => commands::filter(&g, a),
        Command::Synth(a) => commands::synth(&g, a),
        Command::Collect(a) => commands::collect(&g, a),
        Command::Report(a) => commands::report(&g, a),
    }
}

fn run(argv: Vec<OsString>) -> i32 {
    let root = Cli::command();
    let matches = match root.clone().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return usage_exit(e),
    };
    let argv = match config::apply(argv, &root, &matches) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match root
        .try_get_matches_from(&argv)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => return usage_exit(e),
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            if !log::log_enabled!(log::Level::Error) {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os().collect()) as u8)
}
