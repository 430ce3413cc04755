//! `train` and `sweep`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use camegrad::diagnostics::trace_csv;
use camegrad::fmt::float;
use camegrad::toy::{train_with_progress, TrainError, TrainLog, TrainRecord};
use camegrad::{CameGradConfig, Strategy};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::Experiment;
use crate::error::{CliError, Result};
use crate::{fmt_opt, to_json, write_file, Outcome};

const PROGRESS_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub rho: f64,
    pub kappa: f64,
    pub nu: f64,
    /// Recorded steps; fewer than configured when the run diverged.
    pub steps: usize,
    pub final_losses: Vec<f64>,
    pub final_mean_loss: Option<f64>,
    pub final_max_loss: Option<f64>,
    pub negative_ratio: Option<f64>,
    pub final_trace: Option<f64>,
    pub diverged_at: Option<usize>,
    pub csv: PathBuf,
    pub trace_csv: PathBuf,
}

impl RunSummary {
    fn from_log(
        log: &TrainLog,
        came: &CameGradConfig,
        diverged_at: Option<usize>,
        csv: PathBuf,
        trace_csv: PathBuf,
    ) -> Self {
        let last = log.final_record();
        Self {
            problem: log.problem.clone(),
            strategy: log.strategy,
            seed: log.seed,
            rho: came.rho,
            kappa: came.kappa,
            nu: came.nu,
            steps: log.records.len(),
            final_losses: last.map(|r| r.losses.clone()).unwrap_or_default(),
            final_mean_loss: log.final_mean_loss(),
            final_max_loss: log.final_max_loss(),
            negative_ratio: last.and_then(|r| r.negative_ratio),
            final_trace: log.trace_series.last().map(|(_, t)| *t),
            diverged_at,
            csv,
            trace_csv,
        }
    }
}

/// Trains one (strategy, seed, hyperparameter) cell and writes its log CSV
/// to `dir` and its trace CSV to `dir/trace`.
fn run_one(
    exp: &Experiment,
    strategy: Strategy,
    seed: u64,
    came: CameGradConfig,
    dir: &Path,
    quiet: bool,
) -> Result<RunSummary> {
    let cfg = exp.train_config(strategy, seed, came);
    let problem = exp.problem.build(seed)?;
    let label = format!("{} {} seed {}", exp.problem, strategy, seed);
    let steps = exp.steps;
    let mut progress = |r: &TrainRecord| {
        if !quiet && (r.step + 1).is_multiple_of(PROGRESS_EVERY) {
            let mean = r.losses.iter().sum::<f64>() / r.losses.len() as f64;
            eprintln!("{label}: step {}/{steps}, mean loss {mean:.6e}", r.step + 1);
        }
    };
    let (log, diverged_at) = match train_with_progress(problem.as_ref(), &cfg, &mut progress) {
        Ok(log) => (log, None),
        Err(TrainError::Diverged { step, log }) => (*log, Some(step)),
        Err(TrainError::Invalid(e)) => return Err(e.into()),
    };
    let csv = dir.join(log.file_name());
    let trace = dir
        .join("trace")
        .join(log.file_name().replace(".csv", "_trace.csv"));
    write_file(&csv, &log.to_csv())?;
    write_file(&trace, &trace_csv(&log.trace_series))?;
    Ok(RunSummary::from_log(&log, &came, diverged_at, csv, trace))
}

fn divergence_failure(runs: &[RunSummary]) -> Option<CliError> {
    let diverged: Vec<String> = runs
        .iter()
        .filter_map(|r| {
            r.diverged_at.map(|s| {
                format!(
                    "{} {} seed {} diverged at step {s}",
                    r.problem, r.strategy, r.seed
                )
            })
        })
        .collect();
    (!diverged.is_empty()).then(|| CliError::Diverged(diverged.join("; ")))
}

fn runs_csv(runs: &[RunSummary]) -> String {
    let mut out = String::from("strategy,seed,steps,final_mean_loss,final_max_loss,negative_ratio,final_trace,diverged_at\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.strategy,
            r.seed,
            r.steps,
            fmt_opt(r.final_mean_loss),
            fmt_opt(r.final_max_loss),
            fmt_opt(r.negative_ratio),
            fmt_opt(r.final_trace),
            r.diverged_at.map(|s| s.to_string()).unwrap_or_default()
        );
    }
    out
}

/// Trains every (strategy, seed) pair in order.
///
/// Writes one log CSV per run, `runs.csv` with one summary row per run and
/// `summary.json`, which is also printed.
pub fn cmd_train(exp: &Experiment, quiet: bool) -> Result<Outcome> {
    let dir = &exp.output_dir;
    let mut runs = Vec::new();
    for &strategy in &exp.strategies {
        for &seed in &exp.seeds {
            runs.push(run_one(exp, strategy, seed, exp.came, dir, quiet)?);
        }
    }
    let runs_path = dir.join("runs.csv");
    write_file(&runs_path, &runs_csv(&runs))?;
    let report = to_json(&json!({
        "problem": exp.problem,
        "runs_csv": runs_path,
        "runs": runs,
    }));
    write_file(&dir.join("summary.json"), &report)?;
    Ok(Outcome {
        stdout: report,
        failure: divergence_failure(&runs),
    })
}

fn cell_dir(root: &Path, came: &CameGradConfig) -> PathBuf {
    root.join("sweep").join(format!(
        "rho{}_kappa{}_nu{}",
        float(came.rho),
        float(came.kappa),
        float(came.nu)
    ))
}

/// Runs the cartesian product of the sweep axes and seeds, `jobs` at a time
/// (all cores when `None`).
///
/// Writes per-run logs under `sweep/rho<r>_kappa<k>_nu<n>/` and the
/// aggregate `sweep.csv`, rows in axis order (rho, kappa, nu, seed).
pub fn cmd_sweep(exp: &Experiment, quiet: bool, jobs: Option<usize>) -> Result<Outcome> {
    let sweep = exp
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Invariant("config has no [sweep] section".into()))?;
    let [strategy] = exp.strategies[..] else {
        return Err(CliError::Invariant(format!(
            "sweep takes exactly one strategy, config names {}",
            exp.strategies.len()
        )));
    };
    let mut cells = Vec::new();
    for &rho in &sweep.rho {
        for &kappa in &sweep.kappa {
            for &nu in &sweep.nu {
                for &seed in &exp.seeds {
                    cells.push((
                        CameGradConfig {
                            rho,
                            kappa,
                            nu,
                            ..exp.came
                        },
                        seed,
                    ));
                }
            }
        }
    }
    if cells.len() > sweep.max_runs {
        return Err(CliError::Cap {
            runs: cells.len(),
            cap: sweep.max_runs,
        });
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Invariant(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<RunSummary> = pool.install(|| {
        cells
            .par_iter()
            .map(|(came, seed)| {
                run_one(
                    exp,
                    strategy,
                    *seed,
                    *came,
                    &cell_dir(&exp.output_dir, came),
                    quiet,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut aggregate = String::from("rho,kappa,nu,seed,final_mean_loss,final_max_loss\n");
    for r in &runs {
        let _ = writeln!(
            aggregate,
            "{},{},{},{},{},{}",
            float(r.rho),
            float(r.kappa),
            float(r.nu),
            r.seed,
            fmt_opt(r.final_mean_loss),
            fmt_opt(r.final_max_loss)
        );
    }
    let path = exp.output_dir.join("sweep.csv");
    write_file(&path, &aggregate)?;
    let report = to_json(&json!({
        "problem": exp.problem,
        "strategy": strategy,
        "aggregate_csv": path,
        "runs": runs,
    }));
    write_file(&exp.output_dir.join("sweep_summary.json"), &report)?;
    Ok(Outcome {
        stdout: report,
        failure: divergence_failure(&runs),
    })
}
