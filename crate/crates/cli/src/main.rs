//! `sfmreg`: ingestion, benchmark generation, registration and evaluation.
//!
//! Exit codes: 0 success, 2 input error, 3 registration failure,
//! 4 evaluation error.

mod args;
mod commands;
mod run_config;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};

/// Error carrying the process exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Registration(anyhow::Error),
    Evaluation(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Registration(_) => 3,
            Failure::Evaluation(_) => 4,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Registration(e) | Failure::Evaluation(e) => e,
        }
    }
}

pub fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Some(jobs) = cli.jobs.filter(|&j| j > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = run_config::Context::new(&cli, &matches);
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a),
        Command::GenDataset(a) => commands::gen_dataset(&ctx, a),
        Command::Register(a) => commands::register(&ctx, a),
        Command::RegisterDataset(a) => commands::register_dataset(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
