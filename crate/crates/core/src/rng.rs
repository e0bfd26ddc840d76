//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from [`PlcaRng`], a ChaCha8
//! stream keyed with `ChaCha8Rng::seed_from_u64(seed)`. Uniforms are built
//! from the top 53 bits of `next_u64`, so `u = (x >> 11) * 2^-53` lies in
//! `[0, 1)`. Exponential(1) draws are `-ln(1 - u)`, and a symmetric
//! Dirichlet(1) vector is a set of exponential draws divided by their sum.
//! None of these steps depend on platform or library defaults.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct PlcaRng {
    inner: ChaCha8Rng,
}

impl PlcaRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }

    /// Fills `out` with a symmetric Dirichlet(1) draw.
    pub fn dirichlet_uniform(&mut self, out: &mut [f64]) {
        loop {
            for x in out.iter_mut() {
                *x = self.exponential();
            }
            let total: f64 = out.iter().sum();
            if total > 0.0 {
                for x in out.iter_mut() {
                    *x /= total;
                }
                return;
            }
        }
    }
}
