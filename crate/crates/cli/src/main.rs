mod cli;
mod commands;
mod config;
mod data;
mod error;
mod fsutil;

use std::process::ExitCode;

use clap::Parser;

use crate::cli::{Cli, Command};
use crate::error::{CliError, CliResult};

fn run() -> CliResult<()> {
    let argv = config::inject_config(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let msg = e.render().to_string();
            let msg = msg.trim_end().trim_start_matches("error: ");
            return Err(CliError::Usage(msg.to_string()));
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::LmTrain(a) => commands::lm_train(&a),
        Command::Prepare(a) => commands::prepare(&a),
        Command::BuildGraphs(a) => commands::build_graphs(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::Train(a) => commands::train(&a),
        Command::Decode(a) => commands::decode(&a),
        Command::Score(a) => commands::score(&a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
