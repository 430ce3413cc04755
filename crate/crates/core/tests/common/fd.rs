//! Central-difference reference gradients.
//!
//! [`mlp_central_difference`] evaluates `(L(theta + h e_i) - L(theta - h e_i)) / 2h`
//! for the multi-head network without subtracting two nearly equal losses:
//! each per-sample difference is expanded with
//!
//! ```text
//! tanh(a) - tanh(b)          = sinh(a - b) / (cosh a cosh b)
//! softplus(p) - softplus(q)  = ln1p(sigmoid(q) expm1(p - q))
//! 0.5 (p - t)^2 - 0.5 (q - t)^2 = 0.5 (p - q)(p + q - 2t)
//! ```
//!
//! so the result carries relative rather than absolute roundoff. It only runs
//! forward passes and shares no code with the backward pass under test.

#![allow(dead_code)]

use camegrad::toy::{Activation, Batch, MlpSpec};

pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-12;

pub fn relative_error(analytic: f64, reference: f64) -> f64 {
    (analytic - reference).abs() / (analytic.abs() + FD_FLOOR)
}

/// Plain central difference of a scalar function along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[i] += h;
    m[i] -= h;
    (f(&p) - f(&m)) / (p[i] - m[i])
}

enum Coord {
    Trunk { unit: usize, input: Option<usize> },
    HeadWeight { head: usize, unit: usize },
    HeadBias { head: usize },
}

fn locate(spec: &MlpSpec, i: usize) -> Coord {
    let (ni, nh) = (spec.input_dim, spec.hidden_dim);
    if i < nh * ni {
        return Coord::Trunk {
            unit: i / ni,
            input: Some(i % ni),
        };
    }
    if i < nh * ni + nh {
        return Coord::Trunk {
            unit: i - nh * ni,
            input: None,
        };
    }
    let rest = i - nh * ni - nh;
    let head = rest / (nh + 1);
    let j = rest % (nh + 1);
    if j == nh {
        Coord::HeadBias { head }
    } else {
        Coord::HeadWeight { head, unit: j }
    }
}

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Tanh => x.tanh(),
        Activation::Identity => x,
    }
}

fn act_diff(a: Activation, hi: f64, lo: f64, delta: f64) -> f64 {
    match a {
        Activation::Tanh => delta.sinh() / (hi.cosh() * lo.cosh()),
        Activation::Identity => delta,
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Pre-activations and activations of the hidden layer.
fn hidden(spec: &MlpSpec, params: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (ni, nh) = (spec.input_dim, spec.hidden_dim);
    let pre: Vec<f64> = (0..nh)
        .map(|j| (0..ni).map(|c| params[j * ni + c] * x[c]).sum::<f64>() + params[nh * ni + j])
        .collect();
    let post = pre.iter().map(|a| act(spec.activation, *a)).collect();
    (pre, post)
}

fn head_output(spec: &MlpSpec, params: &[f64], hidden: &[f64], head: usize) -> f64 {
    let nh = spec.hidden_dim;
    let off = nh * spec.input_dim + nh + head * (nh + 1);
    (0..nh).map(|j| params[off + j] * hidden[j]).sum::<f64>() + params[off + nh]
}

/// Central difference of task `task`'s batch loss along parameter `i`.
pub fn mlp_central_difference(
    spec: &MlpSpec,
    params: &[f64],
    batch: &Batch,
    task: usize,
    i: usize,
    h: f64,
) -> f64 {
    let nh = spec.hidden_dim;
    let mut plus = params.to_vec();
    let mut minus = params.to_vec();
    plus[i] += h;
    minus[i] -= h;
    let step = plus[i] - minus[i];
    let coord = locate(spec, i);

    let mut total = 0.0;
    for (s, x) in batch.inputs.iter().enumerate() {
        let (pre_p, hid_p) = hidden(spec, &plus, x);
        let (pre_m, hid_m) = hidden(spec, &minus, x);
        let z_p = head_output(spec, &plus, &hid_p, task);
        let z_m = head_output(spec, &minus, &hid_m, task);
        let head_off = nh * spec.input_dim + nh + task * (nh + 1);

        let dz = match coord {
            Coord::Trunk { unit, input } => {
                let da = match input {
                    Some(c) => x[c] * step,
                    None => step,
                };
                params[head_off + unit] * act_diff(spec.activation, pre_p[unit], pre_m[unit], da)
            }
            Coord::HeadWeight { head, unit } if head == task => hid_p[unit] * step,
            Coord::HeadBias { head } if head == task => step,
            _ => 0.0,
        };

        total += if task == 0 {
            0.5 * dz * (z_p + z_m - 2.0 * batch.targets[s])
        } else {
            let label = batch.labels[task - 1][s];
            (sigmoid(z_m) * dz.exp_m1()).ln_1p() - label * dz
        };
    }
    total / batch.len() as f64 / step
}
