use std::path::PathBuf;
use std::process::ExitCode;

use camegrad::{CameGradConfig, SolverSettings, Strategy};
use camegrad_cli::config::{ExperimentConfig, DEFAULT_OUTPUT_DIR, OUTPUT_ENV};
use camegrad_cli::inspect::DEFAULT_RESOLUTION;
use camegrad_cli::{
    cmd_diagnose, cmd_oracle_check, cmd_oracle_check_file, cmd_rectify, cmd_step, cmd_sweep,
    cmd_train, CliError, DiagnoseOptions, OracleCheck, Outcome, Result,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "camegrad",
    version,
    about = "Multi-task gradient surgery experiments"
)]
struct Cli {
    /// Suppress progress lines on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Config file; its [came] section and strategy are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the dual for one gradient set and print the rectified direction.
    Rectify {
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
    },
    /// Run one full update on a gradient set and print every intermediate.
    Step {
        input: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Seed of the SGLD noise stream.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train every (strategy, seed) pair of a config.
    Train { config: PathBuf },
    /// Train the hyperparameter grid of a config's [sweep] section.
    Sweep {
        config: PathBuf,
        /// Concurrent runs; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compare the dual solver with the brute-force primal oracle.
    OracleCheck {
        /// Check a single gradient-set file instead of random instances.
        #[arg(long, conflicts_with_all = ["count", "dims", "tasks", "seed"])]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        dims: usize,
        /// Gradients per instance.
        #[arg(long, default_value_t = 2)]
        tasks: usize,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Cosine histogram from training logs, covariance trace of a stream.
    Diagnose {
        logs: Vec<PathBuf>,
        /// Gradient samples, one per line.
        #[arg(long)]
        stream: Option<PathBuf>,
        /// Report trace(kappa X) / trace(X) for the stream.
        #[arg(long, requires = "stream")]
        kappa: Option<f64>,
        #[arg(long, default_value_t = camegrad::diagnostics::DEFAULT_TRACE_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = camegrad::diagnostics::DEFAULT_BINS)]
        bins: usize,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

/// `--output-dir`, then `CAMEGRAD_OUTPUT`, then the default.
fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn step_settings(o: Overrides) -> Result<(CameGradConfig, Strategy)> {
    let (mut came, mut strategy) = (CameGradConfig::default(), Strategy::Full);
    if let Some(path) = &o.config {
        let cfg = ExperimentConfig::load(path)?;
        came = cfg.came;
        if let Some(names) = &cfg.strategy {
            match camegrad_cli::config::parse_strategies(names)?[..] {
                [s] => strategy = s,
                _ => {
                    return Err(CliError::Invariant(
                        "step takes exactly one strategy".into(),
                    ))
                }
            }
        }
    }
    came.rho = o.rho.unwrap_or(came.rho);
    came.kappa = o.kappa.unwrap_or(came.kappa);
    came.nu = o.nu.unwrap_or(came.nu);
    Ok((came, o.strategy.unwrap_or(strategy)))
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Rectify { input, rho } => cmd_rectify(&input, rho, &SolverSettings::default()),
        Command::Step {
            input,
            overrides,
            seed,
        } => {
            let (came, strategy) = step_settings(overrides)?;
            cmd_step(&input, &came, strategy, seed)
        }
        Command::Train { config } => {
            cmd_train(&ExperimentConfig::load(&config)?.resolve()?, cli.quiet)
        }
        Command::Sweep { config, jobs } => cmd_sweep(
            &ExperimentConfig::load(&config)?.resolve()?,
            cli.quiet,
            jobs,
        ),
        Command::OracleCheck {
            input,
            count,
            dims,
            tasks,
            rho,
            seed,
            resolution,
            output_dir: dir,
        } => match input {
            Some(path) => cmd_oracle_check_file(&path, rho, resolution),
            None => {
                let check = OracleCheck {
                    count,
                    dims,
                    tasks,
                    rho,
                    seed,
                    resolution,
                };
                cmd_oracle_check(&check, &output_dir(dir))
            }
        },
        Command::Diagnose {
            logs,
            stream,
            kappa,
            window,
            bins,
            output_dir: dir,
        } => cmd_diagnose(&DiagnoseOptions {
            logs,
            stream,
            kappa,
            window,
            bins,
            output_dir: output_dir(dir),
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            if let Some(f) = &outcome.failure {
                eprintln!("error: {f}");
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
