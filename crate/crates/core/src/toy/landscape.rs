use super::{TaskEval, ToyProblem};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

const CONFLICT_A0: [f64; 2] = [2.0, 0.0];
const CONFLICT_A1: [f64; 2] = [-2.0, 0.0];
const CONFLICT_H0: [f64; 2] = [1.0, 10.0];
const CONFLICT_H1: [f64; 2] = [10.0, 1.0];

pub const DIMPLE_DEPTH: f64 = 0.3;
pub const DIMPLE_CENTER: f64 = -2.0;
pub const DIMPLE_WIDTH: f64 = 0.15;

/// Half-width of the box initial parameters are drawn from.
const INIT_RADIUS: f64 = 3.0;

fn diag_quadratic(theta: [f64; 2], h: [f64; 2], a: [f64; 2]) -> (f64, [f64; 2]) {
    let r = [theta[0] - a[0], theta[1] - a[1]];
    let loss = 0.5 * (h[0] * r[0] * r[0] + h[1] * r[1] * r[1]);
    (loss, [h[0] * r[0], h[1] * r[1]])
}

/// Two quadratics, `L_0` with curvature `diag(1, 10)` around `(2, 0)` and
/// `L_1` with `diag(10, 1)` around `(-2, 0)`.
pub fn conflict_landscape(theta: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (l0, g0) = diag_quadratic(theta, CONFLICT_H0, CONFLICT_A0);
    let (l1, g1) = diag_quadratic(theta, CONFLICT_H1, CONFLICT_A1);
    ([l0, l1], [g0, g1])
}

/// Double well `0.05 t^4 - 0.5 t^2 + 0.1 t` with a Gaussian dimple of depth
/// 0.3 and width 0.15 at `t = -2`.
pub fn sharp_flat_landscape(theta: f64) -> (f64, f64) {
    let t = theta;
    let z = (t - DIMPLE_CENTER) / DIMPLE_WIDTH;
    let bump = DIMPLE_DEPTH * (-z * z).exp();
    let loss = 0.05 * t.powi(4) - 0.5 * t * t + 0.1 * t - bump;
    let grad = 0.2 * t.powi(3) - t + 0.1 + bump * 2.0 * z / DIMPLE_WIDTH;
    (loss, grad)
}

fn expect_dim(theta: &[f64], d: usize) -> Result<()> {
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: theta.len(),
        });
    }
    Ok(())
}

fn uniform_box(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| rng.uniform_range(-INIT_RADIUS, INIT_RADIUS))
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConflictLandscape;

impl ToyProblem for ConflictLandscape {
    fn name(&self) -> &'static str {
        "conflict"
    }

    fn dim(&self) -> usize {
        2
    }

    fn task_count(&self) -> usize {
        2
    }

    fn initial_params(&self, rng: &mut SeededRng) -> Vec<f64> {
        uniform_box(rng, 2)
    }

    fn evaluate(&self, theta: &[f64], _rng: &mut SeededRng) -> Result<TaskEval> {
        expect_dim(theta, 2)?;
        let (losses, grads) = conflict_landscape([theta[0], theta[1]]);
        Ok(TaskEval {
            losses: losses.to_vec(),
            grads: grads.iter().map(|g| g.to_vec()).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SharpFlatLandscape;

impl ToyProblem for SharpFlatLandscape {
    fn name(&self) -> &'static str {
        "sharp_flat"
    }

    fn dim(&self) -> usize {
        1
    }

    fn task_count(&self) -> usize {
        1
    }

    fn initial_params(&self, rng: &mut SeededRng) -> Vec<f64> {
        uniform_box(rng, 1)
    }

    fn evaluate(&self, theta: &[f64], _rng: &mut SeededRng) -> Result<TaskEval> {
        expect_dim(theta, 1)?;
        let (loss, grad) = sharp_flat_landscape(theta[0]);
        Ok(TaskEval {
            losses: vec![loss],
            grads: vec![vec![grad]],
        })
    }
}

/// Single-task `0.5 theta^T diag(curvature) theta`.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    pub curvature: Vec<f64>,
}

impl Default for QuadraticBowl {
    fn default() -> Self {
        Self {
            curvature: vec![1.0, 4.0],
        }
    }
}

impl QuadraticBowl {
    pub fn max_curvature(&self) -> f64 {
        self.curvature.iter().cloned().fold(0.0, f64::max)
    }
}

impl ToyProblem for QuadraticBowl {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn task_count(&self) -> usize {
        1
    }

    fn initial_params(&self, rng: &mut SeededRng) -> Vec<f64> {
        uniform_box(rng, self.dim())
    }

    fn evaluate(&self, theta: &[f64], _rng: &mut SeededRng) -> Result<TaskEval> {
        expect_dim(theta, self.dim())?;
        let loss = 0.5
            * theta
                .iter()
                .zip(&self.curvature)
                .map(|(t, h)| h * t * t)
                .sum::<f64>();
        let grad = theta
            .iter()
            .zip(&self.curvature)
            .map(|(t, h)| h * t)
            .collect();
        Ok(TaskEval {
            losses: vec![loss],
            grads: vec![grad],
        })
    }
}
