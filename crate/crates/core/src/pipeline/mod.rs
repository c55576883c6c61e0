//! Configuration-driven workflows behind the command-line tool.
//!
//! Every command is a pure function of its configuration, its input files and
//! the seed. Parallel work is split over replicates, trials or series, each
//! with its own random stream, so outputs do not depend on the thread count.

mod commands;
mod config;
mod scenario;

pub use commands::{cmd_eval, cmd_fit, cmd_infer, cmd_prep, cmd_simulate, write_resolved, FitMeta, SeriesMeta};
pub use config::{
    AucScores, EvalSection, FitSection, InferSection, PrepSection, RunConfig, TrainingSpec,
};
pub use scenario::{
    analyze, evaluate, run_scenario, score, BetaSpec, Estimates, MonteCarlo, ReplicateOutcome,
    ScenarioResult, ScenarioSpec, Truth,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Infer,
    Eval,
    Prep,
}

/// Runs `command` on a pool of `config.threads` workers (all cores if unset).
pub fn run(command: Command, config: &RunConfig) -> Result<Vec<String>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = config.threads {
        if k == 0 {
            return Err(Error::Config("threads must be positive".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match command {
        Command::Simulate => cmd_simulate(config),
        Command::Fit => cmd_fit(config),
        Command::Infer => cmd_infer(config),
        Command::Eval => cmd_eval(config),
        Command::Prep => cmd_prep(config),
    })
}
