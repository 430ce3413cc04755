//! Seeded random streams.
//!
//! Every stochastic operation in the crate draws from a [`SeededRng`], a thin
//! wrapper over ChaCha8. ChaCha is counter based and its output is specified
//! bit for bit, so a `(seed, stream)` pair reproduces the same numbers on any
//! platform.
//!
//! Uniform doubles take the top 53 bits of one `u64` draw. Gaussians use the
//! cosine branch of Box–Muller and consume exactly two uniforms each:
//!
//! ```text
//! u1 = 1 - uniform()        // in (0, 1], keeps ln finite
//! u2 = uniform()
//! z  = sqrt(-2 ln u1) * cos(2 pi u2)
//! ```
//!
//! Nothing is cached between calls, so an alternate implementation that
//! follows the recipe above reproduces the Gaussian stream exactly.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids used by the trainer so that initialisation, batch sampling and
/// SGLD noise never share state.
pub mod stream {
    pub const INIT: u64 = 0;
    pub const BATCH: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const DATA: u64 = 3;
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent sub-stream of the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Standard normal draw via Box–Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }
}
