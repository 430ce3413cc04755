use crate::error::{Error, Result};
use crate::grad::dot_slices;
use crate::rng::{stream, SeededRng};

/// Angle between the regression teacher and every classification teacher.
pub const CONFLICT_ANGLE_DEG: f64 = 120.0;

/// Synthetic samples: Gaussian inputs, a linear regression target and one
/// 0/1 label per auxiliary head.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// `labels[k][n]` is the label of sample `n` for auxiliary head `k + 1`.
    pub labels: Vec<Vec<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn aux_heads(&self) -> usize {
        self.labels.len()
    }

    pub fn select(&self, indices: &[usize]) -> Batch {
        Batch {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            labels: self
                .labels
                .iter()
                .map(|l| indices.iter().map(|&i| l[i]).collect())
                .collect(),
        }
    }
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot_slices(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Draws `n` samples. The generator (data stream of `seed`) is consumed in a
/// fixed order: the regression teacher `w`, then one direction per auxiliary
/// head, then the inputs sample by sample. Head `k` labels `v_k . x > 0` with
/// `v_k = cos(120 deg) w + sin(120 deg) p_k`, `p_k` a unit vector orthogonal
/// to `w`.
pub fn synth_data(seed: u64, n: usize, input_dim: usize, aux_heads: usize) -> Result<Batch> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    if input_dim == 0 || (aux_heads > 0 && input_dim < 2) {
        return Err(Error::InvalidConfig(
            "input_dim must be >= 1, and >= 2 with auxiliary heads".into(),
        ));
    }
    let mut rng = SeededRng::with_stream(seed, stream::DATA);
    let w = unit(rng.gaussian_vec(input_dim));
    let angle = CONFLICT_ANGLE_DEG.to_radians();
    let teachers: Vec<Vec<f64>> = (0..aux_heads)
        .map(|_| {
            let p = loop {
                let raw = rng.gaussian_vec(input_dim);
                let along = dot_slices(&raw, &w);
                let perp: Vec<f64> = raw.iter().zip(&w).map(|(r, wi)| r - along * wi).collect();
                if dot_slices(&perp, &perp) > 1e-6 {
                    break unit(perp);
                }
            };
            w.iter()
                .zip(&p)
                .map(|(wi, pi)| angle.cos() * wi + angle.sin() * pi)
                .collect()
        })
        .collect();

    let inputs: Vec<Vec<f64>> = (0..n).map(|_| rng.gaussian_vec(input_dim)).collect();
    let targets = inputs.iter().map(|x| dot_slices(&w, x)).collect();
    let labels = teachers
        .iter()
        .map(|v| {
            inputs
                .iter()
                .map(|x| if dot_slices(v, x) > 0.0 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(Batch {
        inputs,
        targets,
        labels,
    })
}
