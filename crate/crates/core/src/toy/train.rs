use std::fmt::Write as _;

use serde::Serialize;

use super::{ProblemKind, ToyProblem};
use crate::diagnostics::{ConflictStats, TraceMonitor, DEFAULT_BINS, DEFAULT_TRACE_WINDOW};
use crate::error::{Error, Result};
use crate::fmt;
use crate::grad::{cosine, GradVec, GradientSet};
use crate::optimizer::{came_grad_step_with_noise, sgd_update, CameGradConfig, Strategy};
use crate::rng::{stream, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub problem: ProblemKind,
    pub eta: f64,
    pub steps: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub came: CameGradConfig,
    /// Task weights `omega`; all ones when absent.
    pub weights: Option<Vec<f64>>,
    /// Number of recent update directions the covariance trace is taken over.
    pub trace_window: usize,
    /// Also count auxiliary/auxiliary pairs in the conflict statistics.
    pub include_inter_auxiliary: bool,
}

impl TrainConfig {
    pub fn new(
        problem: ProblemKind,
        strategy: Strategy,
        eta: f64,
        steps: usize,
        seed: u64,
    ) -> Self {
        Self {
            problem,
            eta,
            steps,
            seed,
            strategy,
            came: CameGradConfig::default(),
            weights: None,
            trace_window: DEFAULT_TRACE_WINDOW,
            include_inter_auxiliary: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must be > 0, got {}",
                self.eta
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if self.trace_window < 2 {
            return Err(Error::InvalidConfig("trace_window must be >= 2".into()));
        }
        self.came.validate()
    }
}

/// One optimizer step. Losses and gradients are taken at the parameters the
/// step starts from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRecord {
    pub step: usize,
    pub losses: Vec<f64>,
    pub joint_norm: f64,
    /// `min_k cos(g_0, g_k)`; absent for single-task problems.
    pub min_cosine: Option<f64>,
    /// Negative-cosine fraction of all pairs seen so far.
    pub negative_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub problem: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub task_count: usize,
    pub records: Vec<TrainRecord>,
    /// `(step, trace)` once the trace window has filled.
    pub trace_series: Vec<(usize, f64)>,
    pub conflict: ConflictStats,
    pub final_params: Vec<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt::float).unwrap_or_default()
}

impl TrainLog {
    pub fn file_name(&self) -> String {
        format!("{}_{}_{}.csv", self.problem, self.strategy, self.seed)
    }

    pub fn csv_header(task_count: usize) -> String {
        let mut h = String::from("step,strategy,seed");
        for t in 0..task_count {
            let _ = write!(h, ",loss_{t}");
        }
        h.push_str(",joint_norm,min_cosine,negative_ratio");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header(self.task_count);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{},{}", r.step, self.strategy, self.seed);
            for l in &r.losses {
                let _ = write!(out, ",{}", fmt::float(*l));
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                fmt::float(r.joint_norm),
                fmt_opt(r.min_cosine),
                fmt_opt(r.negative_ratio)
            );
        }
        out
    }

    pub fn final_record(&self) -> Option<&TrainRecord> {
        self.records.last()
    }

    pub fn final_mean_loss(&self) -> Option<f64> {
        self.final_record()
            .map(|r| r.losses.iter().sum::<f64>() / r.losses.len() as f64)
    }

    pub fn final_max_loss(&self) -> Option<f64> {
        self.final_record()
            .map(|r| r.losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Invalid(#[from] Error),
    /// A loss or gradient went non-finite. `log` holds every completed step.
    #[error("training diverged at step {step}")]
    Diverged { step: usize, log: Box<TrainLog> },
}

pub fn train(cfg: &TrainConfig) -> std::result::Result<TrainLog, TrainError> {
    let problem = cfg.problem.build(cfg.seed)?;
    train_problem(problem.as_ref(), cfg)
}

pub fn train_problem(
    problem: &dyn ToyProblem,
    cfg: &TrainConfig,
) -> std::result::Result<TrainLog, TrainError> {
    train_with_progress(problem, cfg, &mut |_| {})
}

/// Runs the loop, calling `progress` after every recorded step.
///
/// Initial parameters, mini-batches and SGLD noise each come from their own
/// stream of `cfg.seed`, so switching strategy never shifts the batches.
pub fn train_with_progress(
    problem: &dyn ToyProblem,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(&TrainRecord),
) -> std::result::Result<TrainLog, TrainError> {
    cfg.validate()?;
    let tasks = problem.task_count();
    let weights = match &cfg.weights {
        Some(w) if w.len() != tasks => {
            return Err(Error::WeightCount {
                expected: tasks,
                actual: w.len(),
            }
            .into())
        }
        Some(w) => w.clone(),
        None => vec![1.0; tasks],
    };

    let mut init_rng = SeededRng::with_stream(cfg.seed, stream::INIT);
    let mut batch_rng = SeededRng::with_stream(cfg.seed, stream::BATCH);
    let mut noise_rng = SeededRng::with_stream(cfg.seed, stream::NOISE);

    let mut theta = problem.initial_params(&mut init_rng);
    let mut monitor = TraceMonitor::new(cfg.trace_window)?;
    let mut log = TrainLog {
        problem: problem.name().to_string(),
        strategy: cfg.strategy,
        seed: cfg.seed,
        task_count: tasks,
        records: Vec::with_capacity(cfg.steps),
        trace_series: Vec::new(),
        conflict: ConflictStats::new(DEFAULT_BINS)?,
        final_params: theta.clone(),
    };

    for step in 0..cfg.steps {
        let eval = problem.evaluate(&theta, &mut batch_rng)?;
        let finite = eval.losses.iter().all(|l| l.is_finite())
            && eval.grads.iter().flatten().all(|g| g.is_finite());
        if !finite {
            log.final_params = theta;
            return Err(TrainError::Diverged {
                step,
                log: Box::new(log),
            });
        }
        let grads = eval
            .grads
            .into_iter()
            .map(GradVec::new)
            .collect::<Result<Vec<_>>>()?;
        let gs = GradientSet::new(grads, weights.clone())?;

        let (min_cosine, negative_ratio) = if tasks > 1 {
            log.conflict.record_set(&gs, cfg.include_inter_auxiliary)?;
            let g = gs.grads();
            let mut min_c = f64::INFINITY;
            for gk in &g[1..] {
                min_c = min_c.min(cosine(&g[0], gk)?.value);
            }
            (Some(min_c), Some(log.conflict.negative_ratio()?))
        } else {
            (None, None)
        };

        let out = came_grad_step_with_noise(&gs, &cfg.came, cfg.strategy, &mut noise_rng)?;
        let next = sgd_update(&theta, &out.g_final, cfg.eta)?;

        let record = TrainRecord {
            step,
            losses: eval.losses,
            joint_norm: out.g_joint.norm(),
            min_cosine,
            negative_ratio,
        };
        progress(&record);
        log.records.push(record);
        if let Some(trace) = monitor.push(out.g_final)? {
            log.trace_series.push((step, trace));
        }

        if next.iter().any(|x| !x.is_finite()) {
            log.final_params = theta;
            return Err(TrainError::Diverged {
                step,
                log: Box::new(log),
            });
        }
        theta = next;
    }
    log.final_params = theta;
    Ok(log)
}
