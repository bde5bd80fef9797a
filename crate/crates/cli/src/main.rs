use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod oracle;
mod output;

use args::{Cli, Command};

/// Exit status 2: bad flags, unreadable inputs, invalid configuration.
/// Exit status 1: the run itself failed.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn config(flag: &str, err: impl std::fmt::Display) -> Failure {
        Failure::Config(format!("{flag}: {err}"))
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<tnsynth::Error> for Failure {
    fn from(e: tnsynth::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: --jobs: {e}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Enumerate(a) => commands::enumerate(a),
        Command::Search(a) => commands::search(a, cli.jobs),
        Command::Pbe(a) => commands::pbe(a, cli.jobs),
        Command::Imitate(a) => commands::imitate(a, cli.jobs),
        Command::EvalPolicy(a) => commands::eval_policy(a),
        Command::Heatmap(a) => commands::heatmap(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
