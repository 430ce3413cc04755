//! Multi-task gradient surgery.
//!
//! Per-task gradients are combined in three stages: a conflict-averse
//! direction found inside a trust region around the mean gradient
//! ([`dual`]), a rescale of that direction to a gained copy of the joint
//! gradient's magnitude, and a fusion with the joint gradient
//! ([`optimizer`]).
//!
//! Supporting modules: [`oracle`] holds brute-force reference solvers,
//! [`diagnostics`] the conflict and noise statistics, [`toy`] the synthetic
//! problems and trainer.

pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod fmt;
pub mod grad;
pub mod optimizer;
pub mod oracle;
pub mod rng;
pub mod toy;

pub use diagnostics::{
    covariance_trace, kappa_scaling_check, ConflictStats, CovarianceTraceEstimate,
};
pub use dual::{
    dual_objective, project_to_simplex, rectify, solve_dual, DualSolution, RectificationResult,
    SimplexWeights, SolverSettings,
};
pub use error::{Error, Result};
pub use grad::{cosine_similarity, dot, norm, GradVec, GradientSet};
pub use optimizer::{
    came_grad_step, came_grad_step_with_noise, energy_inject, fuse, sgd_update, CameGradConfig,
    StepResult, Strategy,
};
pub use rng::SeededRng;
