//! Conflict-averse direction rectification.
//!
//! The worst-case improvement problem
//!
//! ```text
//! max_u min_i g_i . u    s.t.  |u - mu| <= rho |mu|
//! ```
//!
//! is solved through its dual over the probability simplex,
//!
//! ```text
//! F(alpha) = g_alpha . mu + sqrt(xi) |g_alpha|,   xi = rho^2 |mu|^2,
//! ```
//!
//! and the primal maximiser is recovered as `mu + sqrt(xi) g_alpha / |g_alpha|`.
//! `F` only depends on `alpha` through `G mu` and the Gram matrix `G G^T`, so
//! the solver works in `K + 1` dimensions regardless of the gradient size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{dot_slices, GradVec, GradientSet};

/// Norm threshold on `mu` and `g_alpha` below which rectification is
/// reported as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-12;

const SIMPLEX_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Stop once a projected step of length `1 / max_i |g_i|^2` moves
    /// `alpha` by less than this in every coordinate.
    pub tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            tolerance: 1e-10,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a >= 0.0))
        {
            return Err(Error::InvalidConfig(format!(
                "simplex weight {index} is {value}, expected a finite non-negative value"
            )));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::InvalidConfig(format!(
                "simplex weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut a = vec![0.0; n];
        a[i] = 1.0;
        Self(a)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Euclidean projection onto the probability simplex (sort based).
pub fn project_to_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::EmptyVector);
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(SimplexWeights(project_raw(v)))
}

fn project_raw(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// `F(alpha) = g_alpha . mu + sqrt(xi) |g_alpha|`.
pub fn dual_objective(alpha: &SimplexWeights, gs: &GradientSet, xi: f64) -> f64 {
    let mu = gs.mean_gradient();
    let g_alpha = gs.combine(alpha.as_slice());
    dot_slices(g_alpha.as_slice(), mu.as_slice()) + xi.sqrt() * g_alpha.norm()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    pub alpha_star: SimplexWeights,
    /// `F(alpha_star)`.
    pub dual_value: f64,
    pub g_alpha: GradVec,
    pub iterations: usize,
    pub converged: bool,
}

/// The dual objective in Gram form, `c = G mu`, `gram = G G^T`, with the norm
/// smoothed to `sqrt(|g_alpha|^2 + delta^2)`.
struct GramDual {
    c: Vec<f64>,
    gram: Vec<Vec<f64>>,
    sqrt_xi: f64,
    delta: f64,
}

impl GramDual {
    fn new(gs: &GradientSet, mu: &GradVec, xi: f64) -> Self {
        let grads = gs.grads();
        let c = grads
            .iter()
            .map(|g| dot_slices(g.as_slice(), mu.as_slice()))
            .collect();
        let gram = grads
            .iter()
            .map(|a| {
                grads
                    .iter()
                    .map(|b| dot_slices(a.as_slice(), b.as_slice()))
                    .collect()
            })
            .collect();
        Self {
            c,
            gram,
            sqrt_xi: xi.sqrt(),
            delta: 0.0,
        }
    }

    fn gram_times(&self, alpha: &[f64]) -> Vec<f64> {
        self.gram.iter().map(|row| dot_slices(row, alpha)).collect()
    }

    fn smoothed_norm(&self, alpha: &[f64], m_alpha: &[f64]) -> f64 {
        (dot_slices(alpha, m_alpha).max(0.0) + self.delta * self.delta).sqrt()
    }

    fn value(&self, alpha: &[f64]) -> f64 {
        let m_alpha = self.gram_times(alpha);
        dot_slices(alpha, &self.c) + self.sqrt_xi * self.smoothed_norm(alpha, &m_alpha)
    }

    fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let m_alpha = self.gram_times(alpha);
        let g_norm = self.smoothed_norm(alpha, &m_alpha);
        if g_norm < DEGENERATE_EPS || self.sqrt_xi == 0.0 {
            return self.c.clone();
        }
        let s = self.sqrt_xi / g_norm;
        self.c
            .iter()
            .zip(&m_alpha)
            .map(|(c, m)| c + s * m)
            .collect()
    }
}

/// Smoothing radii run from `|g|_max` down to this fraction of it.
const FINAL_SMOOTHING: f64 = 1e-14;
const SMOOTHING_DECAY: f64 = 1e-2;

/// Minimises the dual objective over the simplex, starting from uniform
/// weights.
///
/// `F` has a cone-shaped kink wherever `g_alpha = 0`, which plain projected
/// gradient descent can converge to even when it is not the minimum. The
/// solver therefore minimises a sequence of smoothed objectives with
/// shrinking `delta`, each warm-started from the last, by projected gradient
/// descent with a backtracking step. The last radius changes `F` by at most
/// `1e-14 sqrt(xi) |g|_max`. `max_iterations` bounds the total over all
/// stages; convergence is judged on the last one.
pub fn solve_dual(gs: &GradientSet, rho: f64, settings: &SolverSettings) -> Result<DualSolution> {
    check_rho(rho)?;
    settings.validate()?;
    for g in gs.grads() {
        if !g.is_finite() {
            return Err(Error::NonFinite {
                index: 0,
                value: f64::NAN,
            });
        }
    }
    let mu = gs.mean_gradient();
    let xi = rho * rho * dot_slices(mu.as_slice(), mu.as_slice());
    let n = gs.task_count();
    if n == 1 {
        let alpha = SimplexWeights::vertex(1, 0);
        let g_alpha = gs.combine(alpha.as_slice());
        let dual_value = dual_objective(&alpha, gs, xi);
        return Ok(DualSolution {
            alpha_star: alpha,
            dual_value,
            g_alpha,
            iterations: 0,
            converged: true,
        });
    }

    let mut dual = GramDual::new(gs, &mu, xi);
    let scale = dual
        .gram
        .iter()
        .enumerate()
        .map(|(i, row)| row[i])
        .fold(0.0, f64::max);
    let base_step = if scale > 0.0 { 1.0 / scale } else { 1.0 };
    // Objective changes below this are roundoff.
    let noise = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let final_delta = FINAL_SMOOTHING * scale.sqrt();
    let mut deltas = Vec::new();
    let mut delta = scale.sqrt();
    while delta > final_delta {
        deltas.push(delta);
        delta *= SMOOTHING_DECAY;
    }
    deltas.push(final_delta);

    let mut alpha = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    let mut converged = false;

    for (stage, &delta) in deltas.iter().enumerate() {
        dual.delta = delta;
        let last = stage + 1 == deltas.len();
        // Stationarity: how far one projected step of fixed length moves alpha.
        let residual = |dual: &GramDual, alpha: &[f64]| {
            let grad = dual.gradient(alpha);
            let raw: Vec<f64> = alpha
                .iter()
                .zip(&grad)
                .map(|(a, g)| a - base_step * g)
                .collect();
            project_raw(&raw)
                .iter()
                .zip(alpha)
                .map(|(x, a)| (x - a).abs())
                .fold(0.0, f64::max)
        };
        let tol = settings.tolerance;

        let mut step = base_step;
        let mut value = dual.value(&alpha);
        let mut grad = dual.gradient(&alpha);
        let mut done = residual(&dual, &alpha) < tol;

        // A trial step is accepted when the local Lipschitz estimate
        // |grad(next) - grad(alpha)| / |next - alpha| is at most 1 / step, or
        // when it gives a sufficient decrease well above roundoff. The first
        // test keeps resolving alpha where objective values have stopped
        // changing; the second lets large steps through in nearly flat regions.
        while !done && iterations < settings.max_iterations {
            iterations += 1;
            let mut halvings = 0;
            let (next, next_value, next_grad) = loop {
                let raw: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
                let next = project_raw(&raw);
                let next_value = dual.value(&next);
                let next_grad = dual.gradient(&next);
                let dx: Vec<f64> = next.iter().zip(&alpha).map(|(x, a)| x - a).collect();
                let dg: Vec<f64> = next_grad.iter().zip(&grad).map(|(x, g)| x - g).collect();
                let lipschitz = step * dot_slices(&dg, &dg).sqrt() <= dot_slices(&dx, &dx).sqrt();
                let model = value + dot_slices(&grad, &dx) + dot_slices(&dx, &dx) / (2.0 * step);
                let decrease = next_value <= model && next_value < value - noise;
                if lipschitz || decrease || halvings >= 60 {
                    break (next, next_value, next_grad);
                }
                step *= 0.5;
                halvings += 1;
            };
            alpha = next;
            value = next_value;
            grad = next_grad;
            step *= 2.0;
            done = residual(&dual, &alpha) < tol;
        }
        if last {
            converged = done;
        }
    }

    let alpha_star = SimplexWeights(alpha);
    let g_alpha = gs.combine(alpha_star.as_slice());
    let dual_value = dot_slices(g_alpha.as_slice(), mu.as_slice()) + xi.sqrt() * g_alpha.norm();
    Ok(DualSolution {
        alpha_star,
        dual_value,
        g_alpha,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectificationResult {
    pub u_rect: GradVec,
    pub solution: DualSolution,
    /// `rho^2 |mu|^2`.
    pub xi: f64,
    /// `mu` or `g_alpha*` vanished; `u_rect` is then `mu` itself.
    pub degenerate: bool,
}

/// Solves the dual and recovers the rectified direction in closed form.
pub fn rectify(
    gs: &GradientSet,
    rho: f64,
    settings: &SolverSettings,
) -> Result<RectificationResult> {
    let solution = solve_dual(gs, rho, settings)?;
    let mu = gs.mean_gradient();
    let mu_norm = mu.norm();
    let xi = rho * rho * mu_norm * mu_norm;
    let g_norm = solution.g_alpha.norm();
    if mu_norm < DEGENERATE_EPS || g_norm < DEGENERATE_EPS {
        return Ok(RectificationResult {
            u_rect: mu,
            solution,
            xi,
            degenerate: true,
        });
    }
    let u_rect = mu.lin_comb(1.0, &solution.g_alpha, xi.sqrt() / g_norm)?;
    Ok(RectificationResult {
        u_rect,
        solution,
        xi,
        degenerate: false,
    })
}

/// `min_i g_i . u`, the worst per-task first-order improvement along `u`.
pub fn worst_case_improvement(gs: &GradientSet, u: &GradVec) -> Result<f64> {
    gs.grads()
        .iter()
        .map(|g| g.dot(u))
        .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!(
            "rho must lie in [0, 1), got {rho}"
        )));
    }
    Ok(())
}
