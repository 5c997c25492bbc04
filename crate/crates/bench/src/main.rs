use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpt_bench::experiments::{run_bounds, run_grid, run_single, run_sweep};
use mpt_bench::{ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "bench", about = "Run model predictive tree experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides the config's.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Output directory; overrides the config's.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the steady-state tracking bound.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(out) = out {
                config.output_dir = out;
            }
            let workers = workers.max(1);
            match config.experiment {
                ExperimentKind::Grid => {
                    let outcome = run_grid(&config, workers)?;
                    for s in &outcome.summaries {
                        println!(
                            "{:<10} average {:>8.3}  ({} cells, {} flagged)",
                            s.planner.name(),
                            s.workspace_average,
                            s.cells,
                            s.flagged_cells
                        );
                    }
                    Ok(outcome.flagged())
                }
                ExperimentKind::Sweep => {
                    let rows = run_sweep(&config, workers)?;
                    for r in &rows {
                        println!("{:<10} L={:<5} mean {:>8.3} std {:>7.3}", r.planner.name(), r.l, r.mean_value, r.std);
                    }
                    Ok(rows.iter().any(|r| r.flagged > 0))
                }
                ExperimentKind::Single => {
                    let mut flagged = false;
                    for (p, result) in config.planners.iter().zip(run_single(&config)?) {
                        match result {
                            Ok(record) => println!("{:<10} value {:>8.3}", p.kind.name(), record.cumulative_value),
                            Err(e) => {
                                eprintln!("{:<10} failed: {e}", p.kind.name());
                                flagged = true;
                            }
                        }
                    }
                    Ok(flagged)
                }
                ExperimentKind::Bounds => {
                    run_bounds(&config)?;
                    Ok(false)
                }
            }
        }
        Command::Bounds { config, out } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                config.output_dir = out;
            }
            for r in run_bounds(&config)? {
                println!("K={:<4} eta={:<8} eps={:<8} bound {}", r.depth, r.eta, r.eps, r.bound);
            }
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
