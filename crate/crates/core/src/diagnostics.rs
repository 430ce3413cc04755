//! Conflict statistics over a stream of gradient observations, and noise
//! covariance traces.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt;
use crate::grad::{cosine, GradVec, GradientSet};

pub const DEFAULT_BINS: usize = 40;
pub const DEFAULT_TRACE_WINDOW: usize = 100;

/// Accumulated cosine statistics between the primary gradient and each
/// auxiliary gradient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConflictStats {
    histogram: Vec<u64>,
    count: u64,
    negative_count: u64,
    degenerate_count: u64,
    cosine_sum: f64,
    /// Running sum of `I_k` for auxiliary task `k` at index `k - 1`.
    interaction_sums: Vec<f64>,
}

impl Default for ConflictStats {
    fn default() -> Self {
        Self::new(DEFAULT_BINS).expect("default bin count is valid")
    }
}

impl ConflictStats {
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidConfig(
                "histogram needs at least one bin".into(),
            ));
        }
        Ok(Self {
            histogram: vec![0; bins],
            count: 0,
            negative_count: 0,
            degenerate_count: 0,
            cosine_sum: 0.0,
            interaction_sums: Vec::new(),
        })
    }

    pub fn bins(&self) -> usize {
        self.histogram.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn negative_count(&self) -> u64 {
        self.negative_count
    }

    /// Pairs where one gradient was numerically zero (cosine recorded as 0).
    pub fn degenerate_count(&self) -> u64 {
        self.degenerate_count
    }

    pub fn histogram(&self) -> &[u64] {
        &self.histogram
    }

    pub fn interaction_sums(&self) -> &[f64] {
        &self.interaction_sums
    }

    fn bin_of(&self, c: f64) -> usize {
        let bins = self.histogram.len();
        let idx = ((c + 1.0) / 2.0 * bins as f64).floor();
        (idx.max(0.0) as usize).min(bins - 1)
    }

    /// Records a raw cosine value (clamped to `[-1, 1]`).
    pub fn record_cosine(&mut self, c: f64) -> Result<()> {
        if !c.is_finite() {
            return Err(Error::NonFinite { index: 0, value: c });
        }
        let c = c.clamp(-1.0, 1.0);
        let bin = self.bin_of(c);
        self.histogram[bin] += 1;
        self.count += 1;
        if c < 0.0 {
            self.negative_count += 1;
        }
        self.cosine_sum += c;
        Ok(())
    }

    /// Records the pair `(g_0, g_k)` for auxiliary task `k >= 1`.
    pub fn record_pair(
        &mut self,
        g0: &GradVec,
        gk: &GradVec,
        k: usize,
        w0: f64,
        wk: f64,
    ) -> Result<()> {
        if k == 0 {
            return Err(Error::TaskIndex {
                index: 0,
                max: usize::MAX,
            });
        }
        let c = cosine(g0, gk)?;
        let interaction = w0 * wk * g0.dot(gk)?;
        self.record_cosine(c.value)?;
        if c.degenerate {
            self.degenerate_count += 1;
        }
        if self.interaction_sums.len() < k {
            self.interaction_sums.resize(k, 0.0);
        }
        self.interaction_sums[k - 1] += interaction;
        Ok(())
    }

    /// Records every primary/auxiliary pair of the set. With
    /// `include_inter_auxiliary`, auxiliary/auxiliary cosines are recorded too
    /// (they do not contribute to the interaction sums).
    pub fn record_set(&mut self, gs: &GradientSet, include_inter_auxiliary: bool) -> Result<()> {
        let grads = gs.grads();
        let w = gs.weights();
        for k in 1..grads.len() {
            self.record_pair(&grads[0], &grads[k], k, w[0], w[k])?;
        }
        if include_inter_auxiliary {
            for j in 1..grads.len() {
                for k in j + 1..grads.len() {
                    let c = cosine(&grads[j], &grads[k])?;
                    self.record_cosine(c.value)?;
                    if c.degenerate {
                        self.degenerate_count += 1;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn negative_ratio(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyStats);
        }
        Ok(self.negative_count as f64 / self.count as f64)
    }

    pub fn mean_cosine(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyStats);
        }
        Ok((self.cosine_sum / self.count as f64).clamp(-1.0, 1.0))
    }

    /// Adds another accumulator's observations into this one.
    pub fn merge(&mut self, other: &ConflictStats) -> Result<()> {
        if other.bins() != self.bins() {
            return Err(Error::DimensionMismatch {
                expected: self.bins(),
                actual: other.bins(),
            });
        }
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        self.count += other.count;
        self.negative_count += other.negative_count;
        self.degenerate_count += other.degenerate_count;
        self.cosine_sum += other.cosine_sum;
        if self.interaction_sums.len() < other.interaction_sums.len() {
            self.interaction_sums
                .resize(other.interaction_sums.len(), 0.0);
        }
        for (a, b) in self
            .interaction_sums
            .iter_mut()
            .zip(&other.interaction_sums)
        {
            *a += b;
        }
        Ok(())
    }

    /// `(bin_lo, bin_hi, count)` for every bin.
    pub fn histogram_rows(&self) -> Vec<(f64, f64, u64)> {
        let bins = self.bins() as f64;
        self.histogram
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                (
                    -1.0 + 2.0 * i as f64 / bins,
                    -1.0 + 2.0 * (i + 1) as f64 / bins,
                    c,
                )
            })
            .collect()
    }

    /// Histogram as `bin_lo,bin_hi,count` CSV.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (lo, hi, c) in self.histogram_rows() {
            let _ = writeln!(out, "{},{},{c}", fmt::float(lo), fmt::float(hi));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceTraceEstimate {
    pub sample_count: usize,
    pub trace: f64,
}

/// Trace of the unbiased empirical covariance, `sum |x_i - mean|^2 / (n - 1)`.
pub fn covariance_trace(samples: &[GradVec]) -> Result<CovarianceTraceEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            actual: n,
        });
    }
    let d = samples[0].dim();
    let mut mean = vec![0.0; d];
    for s in samples {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: s.dim(),
            });
        }
        for (m, x) in mean.iter_mut().zip(s.as_slice()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let ss: f64 = samples
        .iter()
        .map(|s| {
            s.as_slice()
                .iter()
                .zip(&mean)
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum();
    Ok(CovarianceTraceEstimate {
        sample_count: n,
        trace: ss / (n - 1) as f64,
    })
}

/// `trace(kappa X) / trace(X)`; equals `kappa^2` up to rounding.
pub fn kappa_scaling_check(samples: &[GradVec], kappa: f64) -> Result<f64> {
    let base = covariance_trace(samples)?.trace;
    if base == 0.0 {
        return Err(Error::ZeroTrace);
    }
    let scaled: Vec<GradVec> = samples.iter().map(|s| s.scale(kappa)).collect();
    Ok(covariance_trace(&scaled)?.trace / base)
}

/// Rolling covariance trace over the most recent `window` samples.
#[derive(Debug, Clone)]
pub struct TraceMonitor {
    window: usize,
    buffer: VecDeque<GradVec>,
}

impl TraceMonitor {
    pub fn new(window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                actual: window,
            });
        }
        Ok(Self {
            window,
            buffer: VecDeque::with_capacity(window),
        })
    }

    /// Adds a sample and returns the windowed trace once the window is full.
    pub fn push(&mut self, sample: GradVec) -> Result<Option<f64>> {
        if self.buffer.len() == self.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(sample);
        if self.buffer.len() < self.window {
            return Ok(None);
        }
        let samples: Vec<GradVec> = self.buffer.iter().cloned().collect();
        covariance_trace(&samples).map(|t| Some(t.trace))
    }
}

/// `step,trace` CSV for a trace time series.
pub fn trace_csv(series: &[(usize, f64)]) -> String {
    let mut out = String::from("step,trace\n");
    for (step, trace) in series {
        let _ = writeln!(out, "{step},{}", fmt::float(*trace));
    }
    out
}
