//! One-hidden-layer network with a shared trunk and per-task heads,
//! differentiated by hand.
//!
//! Parameter layout (flat vector):
//!
//! ```text
//! W1    hidden x input, row major
//! b1    hidden
//! head t = 0..=K: weights (hidden) then bias (1)
//! ```
//!
//! Head 0 is a linear regression head with loss `mean 0.5 (y - target)^2`.
//! Heads `1..=K` emit a logit scored with binary cross-entropy,
//! `mean softplus(z) - label z`.

use super::data::{synth_data, Batch};
use super::{TaskEval, ToyProblem};
use crate::error::{Error, Result};
use crate::grad::dot_slices;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Identity => a,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub aux_heads: usize,
    pub activation: Activation,
    pub batch_size: usize,
    /// Size of the fixed training pool mini-batches are drawn from.
    pub pool_size: usize,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            input_dim: 8,
            hidden_dim: 16,
            aux_heads: 2,
            activation: Activation::Tanh,
            batch_size: 64,
            pool_size: 1024,
        }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidConfig(
                "input_dim and hidden_dim must be >= 1".into(),
            ));
        }
        if self.aux_heads == 0 {
            return Err(Error::InvalidConfig(
                "MLP needs at least one auxiliary head".into(),
            ));
        }
        if self.batch_size == 0 || self.pool_size == 0 {
            return Err(Error::InvalidConfig(
                "batch and pool sizes must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn task_count(&self) -> usize {
        self.aux_heads + 1
    }

    fn trunk_len(&self) -> usize {
        self.hidden_dim * self.input_dim + self.hidden_dim
    }

    fn head_offset(&self, t: usize) -> usize {
        self.trunk_len() + t * (self.hidden_dim + 1)
    }

    pub fn param_count(&self) -> usize {
        self.head_offset(self.task_count())
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-task losses and gradients with respect to every parameter. A head's
/// parameters receive zero gradient from every other task.
pub fn mlp_forward_backward(spec: &MlpSpec, params: &[f64], batch: &Batch) -> Result<TaskEval> {
    spec.validate()?;
    if params.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.param_count(),
            actual: params.len(),
        });
    }
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    if batch.aux_heads() != spec.aux_heads {
        return Err(Error::DimensionMismatch {
            expected: spec.aux_heads,
            actual: batch.aux_heads(),
        });
    }
    if let Some(x) = batch.inputs.iter().find(|x| x.len() != spec.input_dim) {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            actual: x.len(),
        });
    }

    let (ni, nh, nt) = (spec.input_dim, spec.hidden_dim, spec.task_count());
    let w1 = &params[..nh * ni];
    let b1 = &params[nh * ni..spec.trunk_len()];
    let n = batch.len() as f64;

    let mut losses = vec![0.0; nt];
    let mut grads = vec![vec![0.0; params.len()]; nt];
    let mut hidden = vec![0.0; nh];

    for (s, x) in batch.inputs.iter().enumerate() {
        for (j, h) in hidden.iter_mut().enumerate() {
            *h = spec
                .activation
                .apply(dot_slices(&w1[j * ni..(j + 1) * ni], x) + b1[j]);
        }
        for t in 0..nt {
            let off = spec.head_offset(t);
            let head = &params[off..off + nh];
            let out = dot_slices(head, &hidden) + params[off + nh];
            let (loss, d_out) = if t == 0 {
                let r = out - batch.targets[s];
                (0.5 * r * r, r)
            } else {
                let label = batch.labels[t - 1][s];
                (softplus(out) - label * out, sigmoid(out) - label)
            };
            losses[t] += loss / n;
            let d_out = d_out / n;

            let g = &mut grads[t];
            for j in 0..nh {
                g[off + j] += d_out * hidden[j];
                let d_pre = d_out * head[j] * spec.activation.derivative(hidden[j]);
                for (gw, xi) in g[j * ni..(j + 1) * ni].iter_mut().zip(x) {
                    *gw += d_pre * xi;
                }
                g[nh * ni + j] += d_pre;
            }
            g[off + nh] += d_out;
        }
    }
    Ok(TaskEval { losses, grads })
}

/// Mini-batch training problem over a fixed synthetic pool.
#[derive(Debug, Clone)]
pub struct MlpProblem {
    spec: MlpSpec,
    pool: Batch,
}

impl MlpProblem {
    pub fn new(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let pool = synth_data(seed, spec.pool_size, spec.input_dim, spec.aux_heads)?;
        Ok(Self { spec, pool })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn pool(&self) -> &Batch {
        &self.pool
    }
}

impl ToyProblem for MlpProblem {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn task_count(&self) -> usize {
        self.spec.task_count()
    }

    /// Trunk weights `N(0, 1/input_dim)`, head weights `N(0, 1/hidden_dim)`,
    /// biases zero.
    fn initial_params(&self, rng: &mut SeededRng) -> Vec<f64> {
        let (ni, nh) = (self.spec.input_dim, self.spec.hidden_dim);
        let mut p = vec![0.0; self.spec.param_count()];
        let trunk_scale = 1.0 / (ni as f64).sqrt();
        for w in &mut p[..nh * ni] {
            *w = trunk_scale * rng.gaussian();
        }
        let head_scale = 1.0 / (nh as f64).sqrt();
        for t in 0..self.spec.task_count() {
            let off = self.spec.head_offset(t);
            for w in &mut p[off..off + nh] {
                *w = head_scale * rng.gaussian();
            }
        }
        p
    }

    fn evaluate(&self, theta: &[f64], rng: &mut SeededRng) -> Result<TaskEval> {
        let indices: Vec<usize> = (0..self.spec.batch_size)
            .map(|_| rng.index(self.pool.len()))
            .collect();
        mlp_forward_backward(&self.spec, theta, &self.pool.select(&indices))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(activation: Activation) -> MlpSpec {
        MlpSpec {
            input_dim: 1,
            hidden_dim: 1,
            aux_heads: 1,
            activation,
            batch_size: 1,
            pool_size: 1,
        }
    }

    fn single_sample(x: f64, target: f64, label: f64) -> Batch {
        Batch {
            inputs: vec![vec![x]],
            targets: vec![target],
            labels: vec![vec![label]],
        }
    }

    #[test]
    fn layout() {
        let spec = MlpSpec::default();
        assert_eq!(spec.param_count(), 16 * 8 + 16 + 3 * 17);
    }

    #[test]
    fn zero_network_on_zero_targets() {
        let spec = MlpSpec {
            aux_heads: 1,
            ..Default::default()
        };
        let batch = Batch {
            inputs: vec![vec![0.3; 8]; 4],
            targets: vec![0.0; 4],
            labels: vec![vec![0.0; 4]],
        };
        let out = mlp_forward_backward(&spec, &vec![0.0; spec.param_count()], &batch).unwrap();
        assert_eq!(out.losses[0], 0.0);
        assert!(out.grads[0].iter().all(|g| *g == 0.0));
    }

    #[test]
    fn single_linear_neuron() {
        // W1 = 1, b1 = 0, head weight 1, head bias 0, identity activation:
        // y = x = 2, L = 0.5 * 2^2 = 2, dL/dW1 = (y - t) * 1 * x = 4,
        // dL/db1 = 2, dL/dhead = (y - t) h = 4, dL/dhead_bias = 2.
        let spec = tiny_spec(Activation::Identity);
        let params = [1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let out = mlp_forward_backward(&spec, &params, &single_sample(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(out.losses[0], 2.0);
        assert_eq!(out.grads[0][0], 4.0);
        assert_eq!(out.grads[0][1], 2.0);
        assert_eq!(out.grads[0][2], 4.0);
        assert_eq!(out.grads[0][3], 2.0);
    }

    #[test]
    fn single_tanh_neuron() {
        // h = tanh 2, y = h, L = 0.5 h^2, dL/dW1 = h (1 - h^2) x.
        let spec = tiny_spec(Activation::Tanh);
        let params = [1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let out = mlp_forward_backward(&spec, &params, &single_sample(2.0, 0.0, 0.0)).unwrap();
        let h = 2f64.tanh();
        assert!((out.losses[0] - 0.5 * h * h).abs() < 1e-15);
        assert!((out.grads[0][0] - h * (1.0 - h * h) * 2.0).abs() < 1e-15);
        assert!((out.grads[0][2] - h * h).abs() < 1e-15);
    }

    #[test]
    fn heads_do_not_leak() {
        let spec = MlpSpec::default();
        let problem = MlpProblem::new(spec, 1).unwrap();
        let params = problem.initial_params(&mut SeededRng::new(2));
        let out = problem.evaluate(&params, &mut SeededRng::new(3)).unwrap();
        for t in 0..spec.task_count() {
            for other in 0..spec.task_count() {
                if other == t {
                    continue;
                }
                let off = spec.head_offset(other);
                assert!(out.grads[t][off..off + spec.hidden_dim + 1]
                    .iter()
                    .all(|g| *g == 0.0));
            }
        }
    }

    #[test]
    fn shape_errors() {
        let spec = MlpSpec::default();
        let batch = synth_data(0, 4, 8, 2).unwrap();
        assert!(mlp_forward_backward(&spec, &[0.0; 3], &batch).is_err());
        let wrong_heads = synth_data(0, 4, 8, 1).unwrap();
        let params = vec![0.0; spec.param_count()];
        assert!(mlp_forward_backward(&spec, &params, &wrong_heads).is_err());
        let bad = MlpSpec {
            aux_heads: 0,
            ..spec
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((sigmoid(-800.0)).abs() < 1e-300 + 1e-16);
    }
}
