//! Brute-force reference solvers for the rectification problem.
//!
//! [`primal_maxmin_oracle`] attacks the primal directly: it evaluates the
//! worst-case improvement `min_i g_i . u` at `mu` and at points
//! `mu + r v` on the trust-region sphere (`r = rho |mu|`), where the
//! directions `v` come from a deterministic low-discrepancy set. The
//! objective is concave and positively homogeneous, so an interior maximiser
//! would be a global one with value zero, and the ray through it keeps that
//! value until it meets the sphere. Sampling the sphere is therefore enough.
//!
//! Sampling alone converges slowly near kinks of the objective (in three
//! dimensions roughly `1e7` directions are needed for `1e-3` accuracy), so the
//! sampled set is augmented with the finitely many active-set stationary
//! points: for every subset `A` of at most `d` tasks, the maximiser of the
//! common value of the tasks in `A` over the part of the sphere where they
//! tie. The true maximiser is one of these points. The candidates are still
//! only scored by evaluating the primal objective, so nothing here shares
//! code with the dual solver.
//!
//! A larger resolution evaluates a superset of directions, so the returned
//! value never decreases as the resolution grows (in `d = 2` this holds when
//! the new resolution is a multiple of the old one):
//!
//! * `d = 1`: `{+1, -1}`
//! * `d = 2`: uniform angle grid
//! * `d = 3`: golden-angle spiral with radical-inverse heights, prefix-nested
//! * `d = 4`: seeded rejection sampling from the cube, prefix-nested

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dual::{SimplexWeights, DEGENERATE_EPS};
use crate::error::{Error, Result};
use crate::grad::{dot_slices, GradVec, GradientSet};
use crate::rng::SeededRng;

pub const MAX_PRIMAL_DIM: usize = 4;
pub const MIN_RESOLUTION: usize = 100;
pub const MAX_GRID_TASKS: usize = 3;

const SPHERE_SEED: u64 = 0x5eed_5fe7e;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub best_u: GradVec,
    /// `max` over evaluated `u` of `min_i g_i . u`.
    pub best_value: f64,
    pub samples_evaluated: usize,
}

/// Unit directions used for a given dimension and resolution.
pub fn sphere_directions(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..resolution)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / resolution as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..resolution)
                .map(|i| {
                    let z = 1.0 - 2.0 * radical_inverse(i as u64 + 1);
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = SeededRng::new(SPHERE_SEED);
            let mut out = Vec::with_capacity(resolution);
            while out.len() < resolution {
                let p: Vec<f64> = (0..dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
                let n2 = dot_slices(&p, &p);
                if n2 > 1e-6 && n2 <= 1.0 {
                    let n = n2.sqrt();
                    out.push(p.iter().map(|x| x / n).collect());
                }
            }
            out
        }
    }
}

/// Base-2 radical inverse (van der Corput sequence).
fn radical_inverse(mut i: u64) -> f64 {
    let mut inv = 0.5;
    let mut out = 0.0;
    while i > 0 {
        if i & 1 == 1 {
            out += inv;
        }
        inv *= 0.5;
        i >>= 1;
    }
    out
}

fn worst_case(grads: &[GradVec], u: &[f64]) -> f64 {
    grads
        .iter()
        .map(|g| dot_slices(g.as_slice(), u))
        .fold(f64::INFINITY, f64::min)
}

/// Maximiser of the tied value of the tasks in `subset` on the sphere of
/// radius `r` around `mu`, or `None` if they cannot tie on the sphere.
fn active_set_candidate(
    grads: &[GradVec],
    mu: &[f64],
    r: f64,
    subset: &[usize],
) -> Option<Vec<f64>> {
    let d = mu.len();
    let a = subset[0];
    let ga = DVector::from_column_slice(grads[a].as_slice());
    let ca = dot_slices(grads[a].as_slice(), mu);
    let m = subset.len() - 1;

    // Directions v with (g_b - g_a).v = (c_a - c_b) / r for b in the subset.
    let (v0, projector) = if m == 0 {
        (DVector::zeros(d), DMatrix::identity(d, d))
    } else {
        let mut rows = DMatrix::zeros(m, d);
        let mut rhs = DVector::zeros(m);
        for (row, &b) in subset[1..].iter().enumerate() {
            let gb = grads[b].as_slice();
            for j in 0..d {
                rows[(row, j)] = gb[j] - ga[j];
            }
            rhs[row] = (ca - dot_slices(gb, mu)) / r;
        }
        let pinv = rows.clone().pseudo_inverse(1e-12).ok()?;
        let v0 = &pinv * &rhs;
        let residual = (&rows * &v0 - &rhs).amax();
        if residual > 1e-9 * (1.0 + rhs.amax()) {
            return None;
        }
        (v0, DMatrix::identity(d, d) - &pinv * &rows)
    };

    let slack = 1.0 - v0.norm_squared();
    if slack < -1e-12 {
        return None;
    }
    let mut w = &projector * &ga;
    if w.norm() < 1e-12 {
        let col = (0..d).max_by(|&i, &j| {
            projector
                .column(i)
                .norm()
                .total_cmp(&projector.column(j).norm())
        })?;
        w = projector.column(col).into_owned();
        if w.norm() < 1e-12 {
            w = DVector::zeros(d);
        }
    }
    let wn = w.norm();
    let dir = if wn > 0.0 {
        v0 + w * (slack.max(0.0).sqrt() / wn)
    } else {
        v0
    };
    Some(mu.iter().zip(dir.iter()).map(|(m, v)| m + r * v).collect())
}

fn subsets_up_to(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << n) {
        if (mask.count_ones() as usize) <= max_size {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

/// Maximises `min_i g_i . u` over `|u - mu| <= rho |mu|` by enumeration.
pub fn primal_maxmin_oracle(gs: &GradientSet, rho: f64, resolution: usize) -> Result<OracleResult> {
    let d = gs.dim();
    if d > MAX_PRIMAL_DIM {
        return Err(Error::OracleLimit(format!(
            "primal oracle supports d <= {MAX_PRIMAL_DIM}, got {d}"
        )));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidConfig(format!(
            "resolution must be >= {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!(
            "rho must lie in [0, 1), got {rho}"
        )));
    }
    let mu = gs.mean_gradient();
    let mu_norm = mu.norm();
    if mu_norm < DEGENERATE_EPS {
        return Ok(OracleResult {
            best_u: GradVec::zeros(d)?,
            best_value: 0.0,
            samples_evaluated: 0,
        });
    }

    let grads = gs.grads();
    let center = mu.as_slice();
    let r = rho * mu_norm;

    let mut best_u = center.to_vec();
    let mut best_value = worst_case(grads, center);
    let mut evaluated = 1;
    let mut consider = |u: Vec<f64>| {
        let value = worst_case(grads, &u);
        evaluated += 1;
        if value > best_value {
            best_value = value;
            best_u = u;
        }
    };

    if r > 0.0 {
        for v in sphere_directions(d, resolution) {
            consider(center.iter().zip(&v).map(|(m, x)| m + r * x).collect());
        }
        for subset in subsets_up_to(grads.len(), d) {
            if let Some(u) = active_set_candidate(grads, center, r, &subset) {
                consider(u);
            }
        }
    }

    Ok(OracleResult {
        best_u: GradVec::new(best_u)?,
        best_value,
        samples_evaluated: evaluated,
    })
}

/// Exhaustive grid search of the dual objective over the simplex.
pub fn dual_grid_oracle(gs: &GradientSet, rho: f64, step: f64) -> Result<(SimplexWeights, f64)> {
    let n_tasks = gs.task_count();
    if n_tasks > MAX_GRID_TASKS {
        return Err(Error::OracleLimit(format!(
            "grid oracle supports at most {MAX_GRID_TASKS} tasks, got {n_tasks}"
        )));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "grid step must lie in (0, 1], got {step}"
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!(
            "rho must lie in [0, 1), got {rho}"
        )));
    }
    let mu = gs.mean_gradient();
    let sqrt_xi = rho * mu.norm();
    let d = gs.dim();
    let grads = gs.grads();
    let eval = |alpha: &[f64]| {
        let mut g_alpha = vec![0.0; d];
        for (a, g) in alpha.iter().zip(grads) {
            for (o, x) in g_alpha.iter_mut().zip(g.as_slice()) {
                *o += a * x;
            }
        }
        dot_slices(&g_alpha, mu.as_slice()) + sqrt_xi * dot_slices(&g_alpha, &g_alpha).sqrt()
    };

    let steps = (1.0 / step).round().max(1.0) as usize;
    let frac = |i: usize| i as f64 / steps as f64;
    let mut best = (vec![1.0; 1], f64::INFINITY);
    let mut offer = |alpha: Vec<f64>| {
        let f = eval(&alpha);
        if f < best.1 {
            best = (alpha, f);
        }
    };
    match n_tasks {
        1 => offer(vec![1.0]),
        2 => (0..=steps).for_each(|i| offer(vec![frac(i), frac(steps - i)])),
        _ => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    offer(vec![frac(i), frac(j), frac(steps - i - j)]);
                }
            }
        }
    }
    let (alpha, value) = best;
    Ok((SimplexWeights::new(alpha)?, value))
}
