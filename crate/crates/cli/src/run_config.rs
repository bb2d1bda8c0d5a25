use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory};
use serde::Serialize;
use serde_json::Value;

use crate::args::Cli;

/// Effective configuration echoed into every JSON output. `--jobs` is left
/// out: it never changes results.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub seed: u64,
    pub seed_source: &'static str,
    /// Flags given explicitly (command line or environment); everything else
    /// is a default.
    pub overrides: Vec<String>,
    pub args: Value,
    pub effective: Value,
}

pub struct Context {
    pub seed: u64,
    subcommand: String,
    seed_source: &'static str,
    overrides: Vec<String>,
}

fn source_label(s: Option<ValueSource>) -> &'static str {
    match s {
        Some(ValueSource::CommandLine) => "flag",
        Some(ValueSource::EnvVariable) => "env",
        _ => "default",
    }
}

impl Context {
    pub fn new(cli: &Cli, matches: &ArgMatches) -> Self {
        let (subcommand, sub) = matches.subcommand().expect("subcommand is required");
        let command = Cli::command();
        let options: Vec<String> = command
            .find_subcommand(subcommand)
            .expect("known subcommand")
            .get_arguments()
            .filter(|a| !a.is_positional() && !a.is_global_set())
            .map(|a| a.get_id().to_string())
            .collect();
        let mut overrides: Vec<String> = options
            .into_iter()
            .filter(|id| id != "seed" && id != "jobs")
            .filter(|id| matches!(sub.value_source(id), Some(ValueSource::CommandLine | ValueSource::EnvVariable)))
            .collect();
        overrides.sort();
        let seed_source = source_label(sub.value_source("seed").or_else(|| matches.value_source("seed")));
        Self { seed: cli.seed, subcommand: subcommand.to_string(), seed_source, overrides }
    }

    pub fn run_config(&self, args: &impl Serialize, effective: Value) -> RunConfig {
        RunConfig {
            subcommand: self.subcommand.clone(),
            seed: self.seed,
            seed_source: self.seed_source,
            overrides: self.overrides.clone(),
            args: serde_json::to_value(args).expect("arguments serialize"),
            effective,
        }
    }

    pub fn config_value(&self, args: &impl Serialize, effective: Value) -> Value {
        serde_json::to_value(self.run_config(args, effective)).expect("config serializes")
    }
}
