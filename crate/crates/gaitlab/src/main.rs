use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaitlab::{execute, Command, ExperimentConfig, EXIT_INVALID_CONFIG};

/// Hybrid-system gait experiments: pendulum and 9-DOF biped Poincaré
/// analyses with CSV/JSON output.
#[derive(Parser)]
#[command(name = "gaitlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config's `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of steps, overriding the config's `steps`.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Seed for random perturbations, overriding the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Simulate pendulum steps from a perturbed synchronized start.
    LipSim,
    /// Pendulum map Jacobian, spectrum and measure convergence.
    LipPoincare,
    /// Analytic vs numeric contraction factor over a parameter grid.
    LambdaSweep,
    /// Walk the closed-loop biped from a lifted reduced state.
    BipedSim,
    /// Biped fixed point, map spectrum, iterated sequence and yaw check.
    BipedPoincare,
    /// Run the experiment named by the config's `model` and `analysis`.
    Run,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID_CONFIG as u8 } else { 0 });
        }
    };
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    };
    let result = config.and_then(|mut config| {
        if let Some(steps) = cli.steps {
            config.steps = Some(steps);
        }
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        let out = cli.out.clone().unwrap_or_else(|| config.out_dir.clone());
        let command = match cli.command {
            Sub::LipSim => Command::LipSim,
            Sub::LipPoincare => Command::LipPoincare,
            Sub::LambdaSweep => Command::LambdaSweep,
            Sub::BipedSim => Command::BipedSim,
            Sub::BipedPoincare => Command::BipedPoincare,
            Sub::Run => Command::select(config.model, config.analysis)?,
        };
        execute(command, &config, &out)
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gaitlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
