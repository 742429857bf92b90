//! `admeas`: run, validate and cost adaptive measurement experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid config, 3 the
//! exhaustive search would exceed its budget.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_measure::experiment::{self, OptimizerKind};
use adaptive_measure::{Experiment, ExperimentConfig, ExperimentError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "admeas", version, about = "Adaptive generalized measurement designer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build every (N, eta) cell and write the result table, tree dumps and histograms.
    Run {
        config: PathBuf,
        /// Overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the exhaustive-search cost for every configured depth.
    Cost { config: PathBuf },
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;

fn exit_code(err: &ExperimentError) -> u8 {
    match err {
        ExperimentError::Parse(_) | ExperimentError::Invalid(_) => EXIT_INVALID,
        ExperimentError::Budget(_) => EXIT_BUDGET,
        _ => EXIT_RUNTIME,
    }
}

fn load(path: &Path) -> Result<Experiment, ExperimentError> {
    ExperimentConfig::load(path)?.validate()
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<(), ExperimentError> {
    let exp = load(config)?;
    let dir = out.unwrap_or_else(|| exp.config.output.dir.clone());
    let cells = experiment::run(&exp)?;
    experiment::write_artifacts(&dir, &cells)?;
    print!("{}", experiment::results_csv(&cells));
    log::info!("artifacts written to {}", dir.display());
    Ok(())
}

fn validate(config: &Path) -> Result<(), ExperimentError> {
    let exp = load(config)?;
    println!(
        "ok: {} candidates, {} x {} cells, {} outcomes per step",
        exp.pool.len(),
        exp.config.depths.len(),
        exp.povms.len(),
        exp.outcomes()
    );
    Ok(())
}

fn cost(config: &Path) -> Result<bool, ExperimentError> {
    let exp = load(config)?;
    let budget = exp.config.exhaustive_budget as u128;
    println!("N,M,S,internal_nodes,combinations,log10,within_budget");
    let mut all_within = true;
    for c in exp.costs() {
        let within = c.within(budget);
        all_within &= within;
        println!(
            "{},{},{},{},{},{:.3},{}",
            c.depth, c.outcomes, c.samples, c.internal_nodes, c, c.log10(), within
        );
    }
    Ok(all_within || exp.config.optimizer != OptimizerKind::Exhaustive)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Validate { config } => validate(&config),
        Command::Cost { config } => match cost(&config) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("exhaustive search exceeds the configured budget");
                return ExitCode::from(EXIT_BUDGET);
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
