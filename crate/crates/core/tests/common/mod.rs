#![allow(dead_code)]

pub mod fd;

use camegrad::{GradVec, GradientSet, SeededRng};

/// `tasks` gradients with components uniform in `[-1, 1]`, unit weights.
pub fn uniform_set(rng: &mut SeededRng, dim: usize, tasks: usize) -> GradientSet {
    let grads = (0..tasks)
        .map(|_| GradVec::new((0..dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap())
        .collect();
    GradientSet::unweighted(grads).unwrap()
}

/// Like [`uniform_set`] but every gradient gets its own scale, log-uniform
/// in `[10^lo, 10^hi]`, and weights are drawn from `[0.5, 2]`.
pub fn scaled_set(rng: &mut SeededRng, dim: usize, tasks: usize, lo: f64, hi: f64) -> GradientSet {
    let grads = (0..tasks)
        .map(|_| {
            let s = 10f64.powf(rng.uniform_range(lo, hi));
            GradVec::new((0..dim).map(|_| s * rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
        })
        .collect();
    let weights = (0..tasks).map(|_| rng.uniform_range(0.5, 2.0)).collect();
    GradientSet::new(grads, weights).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
