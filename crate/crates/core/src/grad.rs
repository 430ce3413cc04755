//! Dense gradient vectors and the per-task gradient container.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt;

/// Norm below which a vector counts as zero for cosine computations.
pub const COSINE_EPS: f64 = 1e-12;

/// A dense, finite gradient vector of dimension `d >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct GradVec(Vec<f64>);

impl GradVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    /// Wraps arithmetic output of already validated vectors. Overflow can
    /// still produce infinities, which `check_finite` catches at boundaries.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(self) -> Result<Self> {
        Self::new(self.0)
    }

    fn check_dim(&self, other: &GradVec) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &GradVec) -> Result<f64> {
        self.check_dim(other)?;
        Ok(dot_slices(&self.0, &other.0))
    }

    pub fn norm(&self) -> f64 {
        dot_slices(&self.0, &self.0).sqrt()
    }

    pub fn scale(&self, c: f64) -> GradVec {
        Self::from_raw(self.0.iter().map(|v| c * v).collect())
    }

    pub fn add(&self, other: &GradVec) -> Result<GradVec> {
        self.check_dim(other)?;
        Ok(Self::from_raw(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &GradVec) -> Result<GradVec> {
        self.check_dim(other)?;
        Ok(Self::from_raw(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &GradVec, b: f64) -> Result<GradVec> {
        self.check_dim(other)?;
        Ok(Self::from_raw(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }
}

impl TryFrom<Vec<f64>> for GradVec {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl AsRef<[f64]> for GradVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot(a: &GradVec, b: &GradVec) -> Result<f64> {
    a.dot(b)
}

pub fn norm(a: &GradVec) -> f64 {
    a.norm()
}

/// Cosine similarity together with a flag telling whether either input was
/// numerically zero (in which case `value` is 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    pub degenerate: bool,
}

pub fn cosine(a: &GradVec, b: &GradVec) -> Result<Cosine> {
    let d = a.dot(b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na < COSINE_EPS || nb < COSINE_EPS {
        return Ok(Cosine {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Cosine {
        value: (d / (na * nb)).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

pub fn cosine_similarity(a: &GradVec, b: &GradVec) -> Result<f64> {
    cosine(a, b).map(|c| c.value)
}

/// Per-task gradients `g_0..g_K` (index 0 is the primary task) together with
/// their static scalarization weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientSet {
    grads: Vec<GradVec>,
    weights: Vec<f64>,
}

impl GradientSet {
    pub fn new(grads: Vec<GradVec>, weights: Vec<f64>) -> Result<Self> {
        let first = grads.first().ok_or(Error::NoTasks)?;
        let d = first.dim();
        for g in &grads[1..] {
            if g.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: g.dim(),
                });
            }
        }
        if weights.len() != grads.len() {
            return Err(Error::WeightCount {
                expected: grads.len(),
                actual: weights.len(),
            });
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidWeight { index, value });
        }
        Ok(Self { grads, weights })
    }

    /// All weights equal to one.
    pub fn unweighted(grads: Vec<GradVec>) -> Result<Self> {
        let n = grads.len();
        Self::new(grads, vec![1.0; n])
    }

    /// Convenience constructor from raw rows.
    pub fn from_rows(rows: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let grads = rows.into_iter().map(GradVec::new).collect::<Result<_>>()?;
        Self::new(grads, weights)
    }

    pub fn dim(&self) -> usize {
        self.grads[0].dim()
    }

    /// Number of tasks, `K + 1`.
    pub fn task_count(&self) -> usize {
        self.grads.len()
    }

    pub fn grads(&self) -> &[GradVec] {
        &self.grads
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same structure with every gradient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let grads = self
            .grads
            .iter()
            .map(|g| g.scale(c).check_finite())
            .collect::<Result<_>>()?;
        Self::new(grads, self.weights.clone())
    }

    /// `sum_i w_i g_i`.
    pub fn joint_gradient(&self) -> GradVec {
        self.combine(&self.weights)
    }

    /// Unweighted arithmetic mean of the task gradients.
    pub fn mean_gradient(&self) -> GradVec {
        let n = self.task_count() as f64;
        let mut mu = vec![0.0; self.dim()];
        for g in &self.grads {
            for (m, v) in mu.iter_mut().zip(g.as_slice()) {
                *m += v;
            }
        }
        mu.iter_mut().for_each(|m| *m /= n);
        GradVec::from_raw(mu)
    }

    /// `sum_i c_i g_i` for arbitrary coefficients (one per task).
    pub fn combine(&self, coeffs: &[f64]) -> GradVec {
        assert_eq!(coeffs.len(), self.task_count(), "one coefficient per task");
        let mut out = vec![0.0; self.dim()];
        for (c, g) in coeffs.iter().zip(&self.grads) {
            for (o, v) in out.iter_mut().zip(g.as_slice()) {
                *o += c * v;
            }
        }
        GradVec::from_raw(out)
    }

    /// Signed interaction term `w_0 w_k (g_0 . g_k)` for auxiliary task `k`.
    pub fn interaction_term(&self, k: usize) -> Result<f64> {
        let max = self.task_count() - 1;
        if k == 0 || k > max {
            return Err(Error::TaskIndex { index: k, max });
        }
        Ok(self.weights[0] * self.weights[k] * self.grads[0].dot(&self.grads[k])?)
    }

    /// Squared norm of the joint gradient split into per-task energies and
    /// primary/auxiliary interactions. Auxiliary/auxiliary cross terms are
    /// left out of `approximate`; `exact` is the true `|g_joint|^2`.
    pub fn energy_decomposition(&self) -> EnergyDecomposition {
        let squared_terms: Vec<f64> = self
            .grads
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| w * w * dot_slices(g.as_slice(), g.as_slice()))
            .collect();
        let interaction_terms: Vec<f64> = (1..self.task_count())
            .map(|k| 2.0 * self.interaction_term(k).expect("k in range"))
            .collect();
        let approximate = squared_terms.iter().sum::<f64>() + interaction_terms.iter().sum::<f64>();
        let joint = self.joint_gradient();
        EnergyDecomposition {
            squared_terms,
            interaction_terms,
            approximate,
            exact: dot_slices(joint.as_slice(), joint.as_slice()),
        }
    }

    /// Parses the whitespace separated text format:
    ///
    /// ```text
    /// d K+1
    /// w_0 ... w_K
    /// g_0 components (d values)
    /// ...
    /// g_K components
    /// ```
    ///
    /// Blank lines are skipped; line numbers in errors refer to the raw input.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header `d K+1`".into(),
        })?;
        let header: Vec<&str> = header.split_whitespace().collect();
        if header.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("header must be `d K+1`, found {} fields", header.len()),
            });
        }
        let parse_count = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("expected a non-negative integer, found `{s}`"),
            })
        };
        let d = parse_count(header[0])?;
        let tasks = parse_count(header[1])?;
        if d == 0 || tasks == 0 {
            return Err(Error::Invariant {
                line,
                message: "dimension and task count must be at least 1".into(),
            });
        }

        let (wline, wtext) = lines.next().ok_or(Error::Parse {
            line: line + 1,
            message: "missing weights line".into(),
        })?;
        let weights = parse_row(wline, wtext, tasks)?;
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Invariant {
                line: wline,
                message: format!("weights must be strictly positive and finite, found {w}"),
            });
        }

        let mut grads = Vec::with_capacity(tasks);
        let mut last = wline;
        for i in 0..tasks {
            let (gline, gtext) = lines.next().ok_or(Error::Parse {
                line: last + 1,
                message: format!("missing gradient row {i} ({tasks} expected)"),
            })?;
            let row = parse_row(gline, gtext, d)?;
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Invariant {
                    line: gline,
                    message: format!("gradient components must be finite, found {v}"),
                });
            }
            grads.push(GradVec::from_raw(row));
            last = gline;
        }
        if let Some((extra, _)) = lines.next() {
            return Err(Error::Parse {
                line: extra,
                message: "unexpected trailing content".into(),
            });
        }
        Self::new(grads, weights)
    }

    /// Inverse of [`GradientSet::parse`]; floats use shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.dim(), self.task_count());
        let _ = writeln!(out, "{}", join(&self.weights));
        for g in &self.grads {
            let _ = writeln!(out, "{}", join(g.as_slice()));
        }
        out
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| fmt::float(*v))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_row(line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let values = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse `{tok}` as a number"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::Parse {
            line,
            message: format!("expected {expected} values, found {}", values.len()),
        });
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyDecomposition {
    /// `w_i^2 |g_i|^2` for every task.
    pub squared_terms: Vec<f64>,
    /// `2 I_k` for every auxiliary task.
    pub interaction_terms: Vec<f64>,
    pub approximate: f64,
    pub exact: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> GradVec {
        GradVec::new(xs.to_vec()).unwrap()
    }

    fn set(rows: &[&[f64]], w: &[f64]) -> GradientSet {
        GradientSet::from_rows(rows.iter().map(|r| r.to_vec()).collect(), w.to_vec()).unwrap()
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(dot(&v(&[3.0, 4.0]), &v(&[3.0, 4.0])).unwrap(), 25.0);
        assert_eq!(
            dot(&v(&[1.0, 2.0, 3.0]), &v(&[1.0, 1.0, 1.0])).unwrap(),
            6.0
        );
        assert!(matches!(
            dot(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&v(&[3.0, 4.0])), 5.0);
        assert_eq!(norm(&v(&[0.0, 0.0])), 0.0);
        assert_eq!(norm(&v(&[1.0, 1.0, 1.0, 1.0])), 2.0);
    }

    #[test]
    fn rejects_bad_vectors() {
        assert_eq!(GradVec::new(vec![]), Err(Error::EmptyVector));
        assert!(matches!(
            GradVec::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(GradVec::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn joint_gradient_examples() {
        assert_eq!(set(&[&[1.0, 0.0]], &[1.0]).joint_gradient(), v(&[1.0, 0.0]));
        assert_eq!(
            set(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]).joint_gradient(),
            v(&[1.0, 1.0])
        );
        assert_eq!(
            set(&[&[2.0, 0.0], &[0.0, 2.0]], &[0.5, 0.5]).joint_gradient(),
            v(&[1.0, 1.0])
        );
    }

    #[test]
    fn mean_gradient_ignores_weights() {
        assert_eq!(
            set(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]).mean_gradient(),
            v(&[0.5, 0.5])
        );
        assert_eq!(
            set(&[&[1.0, 0.0], &[-1.0, 0.0]], &[1.0, 1.0]).mean_gradient(),
            v(&[0.0, 0.0])
        );
        assert_eq!(
            set(&[&[2.0, 2.0, 2.0]], &[1.0]).mean_gradient(),
            v(&[2.0, 2.0, 2.0])
        );
        assert_eq!(
            set(&[&[1.0, 0.0], &[0.0, 1.0]], &[3.0, 0.1]).mean_gradient(),
            v(&[0.5, 0.5])
        );
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(),
            0.0
        );
        assert!((cosine_similarity(&v(&[1.0, 1.0]), &v(&[2.0, 2.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap(),
            -1.0
        );
    }

    #[test]
    fn cosine_with_zero_vector_is_flagged() {
        let c = cosine(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.degenerate);
        let c = cosine(&v(&[1e-13, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert!(c.degenerate);
    }

    #[test]
    fn interaction_term_examples() {
        assert_eq!(
            set(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0])
                .interaction_term(1)
                .unwrap(),
            0.0
        );
        assert_eq!(
            set(&[&[1.0, 1.0], &[-1.0, -1.0]], &[1.0, 1.0])
                .interaction_term(1)
                .unwrap(),
            -2.0
        );
        assert_eq!(
            set(&[&[3.0, 4.0], &[3.0, 4.0]], &[0.5, 2.0])
                .interaction_term(1)
                .unwrap(),
            25.0
        );
        let gs = set(&[&[1.0], &[1.0]], &[1.0, 1.0]);
        assert!(matches!(
            gs.interaction_term(0),
            Err(Error::TaskIndex { .. })
        ));
        assert!(matches!(
            gs.interaction_term(2),
            Err(Error::TaskIndex { .. })
        ));
    }

    #[test]
    fn energy_decomposition_examples() {
        let e = set(&[&[1.0, 0.0]], &[1.0]).energy_decomposition();
        assert_eq!(e.squared_terms, vec![1.0]);
        assert!(e.interaction_terms.is_empty());
        assert_eq!((e.approximate, e.exact), (1.0, 1.0));

        let e = set(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]).energy_decomposition();
        assert_eq!((e.approximate, e.exact), (2.0, 2.0));

        // The omitted auxiliary cross term 2 g_1.g_2 = 2 is exactly the gap.
        let e =
            set(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]], &[1.0, 1.0, 1.0]).energy_decomposition();
        assert_eq!(e.approximate, 7.0);
        assert_eq!(e.exact, 9.0);
    }

    #[test]
    fn set_validation() {
        assert_eq!(GradientSet::new(vec![], vec![]), Err(Error::NoTasks));
        assert!(matches!(
            GradientSet::new(vec![v(&[1.0]), v(&[1.0, 2.0])], vec![1.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            GradientSet::new(vec![v(&[1.0])], vec![0.0]),
            Err(Error::InvalidWeight { index: 0, .. })
        ));
        assert!(matches!(
            GradientSet::new(vec![v(&[1.0])], vec![1.0, 1.0]),
            Err(Error::WeightCount { .. })
        ));
    }

    #[test]
    fn parse_and_format() {
        let text = "2 2\n1 1\n1 0\n0 1\n";
        let gs = GradientSet::parse(text).unwrap();
        assert_eq!(gs, set(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]));
        assert_eq!(gs.to_text(), text);
    }

    #[test]
    fn parse_errors_cite_lines() {
        let err = GradientSet::parse("2\n1 1\n1 0\n0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
        let err = GradientSet::parse("x 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = GradientSet::parse("2 2\n1 1\n1 0\n0 y\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        let err = GradientSet::parse("2 2\n1 1\n1 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        let err = GradientSet::parse("2 2\n1 -1\n1 0\n0 1\n").unwrap_err();
        assert!(matches!(err, Error::Invariant { line: 2, .. }));
        let err = GradientSet::parse("2 2\n1 1\n1 0\n0 inf\n").unwrap_err();
        assert!(matches!(err, Error::Invariant { line: 4, .. }));
        let err = GradientSet::parse("2 1\n1\n1 0\n5 5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        let err = GradientSet::parse("").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
