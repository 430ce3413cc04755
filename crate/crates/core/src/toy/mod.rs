//! Synthetic multi-task problems and the deterministic trainer.
//!
//! The landscapes are constructed fixtures, not reproductions of any real
//! workload: [`ConflictLandscape`] has two ill-conditioned quadratics whose
//! gradients are exactly antiparallel at the origin, [`SharpFlatLandscape`]
//! is a double well with a narrow dimple carved into the left basin, and
//! [`QuadraticBowl`] is a single-task convex sanity problem. [`MlpProblem`]
//! is a shared-trunk network with one regression head and `K` binary heads.

mod data;
mod landscape;
mod mlp;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use data::{synth_data, Batch, CONFLICT_ANGLE_DEG};
pub use landscape::{
    conflict_landscape, sharp_flat_landscape, ConflictLandscape, QuadraticBowl, SharpFlatLandscape,
    DIMPLE_CENTER, DIMPLE_DEPTH, DIMPLE_WIDTH,
};
pub use mlp::{mlp_forward_backward, Activation, MlpProblem, MlpSpec};
pub use train::{
    train, train_problem, train_with_progress, TrainConfig, TrainError, TrainLog, TrainRecord,
};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Per-task losses and full-length gradients at one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEval {
    pub losses: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

/// A differentiable multi-task objective.
pub trait ToyProblem: Send + Sync {
    fn name(&self) -> &'static str;

    /// Parameter dimension.
    fn dim(&self) -> usize;

    /// Number of tasks, `K + 1`.
    fn task_count(&self) -> usize;

    fn initial_params(&self, rng: &mut SeededRng) -> Vec<f64>;

    /// Losses and gradients at `theta`. Stochastic problems draw their
    /// mini-batch from `rng`; deterministic ones ignore it.
    fn evaluate(&self, theta: &[f64], rng: &mut SeededRng) -> Result<TaskEval>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Conflict,
    SharpFlat,
    Quadratic,
    Mlp,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::Conflict,
        ProblemKind::SharpFlat,
        ProblemKind::Quadratic,
        ProblemKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Conflict => "conflict",
            ProblemKind::SharpFlat => "sharp_flat",
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::Mlp => "mlp",
        }
    }

    /// Instantiates the problem; `seed` only matters for data-backed problems.
    pub fn build(self, seed: u64) -> Result<Box<dyn ToyProblem>> {
        Ok(match self {
            ProblemKind::Conflict => Box::new(ConflictLandscape),
            ProblemKind::SharpFlat => Box::new(SharpFlatLandscape),
            ProblemKind::Quadratic => Box::new(QuadraticBowl::default()),
            ProblemKind::Mlp => Box::new(MlpProblem::new(MlpSpec::default(), seed)?),
        })
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown problem `{s}`")))
    }
}
