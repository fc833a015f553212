//! Experiment runner for `gaitlab-core`: JSON configuration, CSV and JSON
//! artifacts, and the subcommands of the `gaitlab` binary.

pub mod config;
mod error;
pub mod experiments;
pub mod table;

use std::path::Path;

pub use config::{Analysis, ExperimentConfig, Model};
pub use error::{CliError, EXIT_GAIT_FAILURE, EXIT_INVALID_CONFIG, EXIT_IO, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    LipSim,
    LipPoincare,
    LipConvergence,
    LambdaSweep,
    BipedSim,
    BipedPoincare,
}

impl Command {
    /// The experiment a config's `model` and `analysis` select.
    pub fn select(model: Model, analysis: Analysis) -> Result<Command, CliError> {
        use Analysis::*;
        Ok(match (model, analysis) {
            (Model::Lip, Simulate) => Command::LipSim,
            (Model::Lip, Poincare) => Command::LipPoincare,
            (Model::Lip, Convergence) => Command::LipConvergence,
            (Model::Lip, LambdaSweep) => Command::LambdaSweep,
            (Model::Biped, Simulate) => Command::BipedSim,
            (Model::Biped, Poincare | Convergence) => Command::BipedPoincare,
            (Model::Biped, LambdaSweep) => {
                return Err(CliError::Config("lambda-sweep applies to the lip model only".into()))
            }
        })
    }
}

/// Validates `config` and runs `command`, writing artifacts into `out`.
pub fn execute(command: Command, config: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    config.validate()?;
    match command {
        Command::LipSim => experiments::lip_sim(config, out),
        Command::LipPoincare => experiments::lip_poincare(config, out),
        Command::LipConvergence => experiments::lip_convergence(config, out),
        Command::LambdaSweep => experiments::lambda_sweep(config, out),
        Command::BipedSim => experiments::biped_sim(config, out),
        Command::BipedPoincare => experiments::biped_poincare(config, out),
    }
}
