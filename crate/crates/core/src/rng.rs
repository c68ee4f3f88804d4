//! Seeded randomness for simulations.
//!
//! Every stochastic component draws from an [`RngStream`], a ChaCha8 stream cipher
//! keyed by a 64-bit seed (`rand_chacha::ChaCha8Rng::seed_from_u64`). ChaCha is a
//! counter-mode generator, so a seed fully determines the sequence on every platform.
//! Derived draws are built from raw `u64` words by the fixed rules below, so no
//! library sampling algorithm sits between the seed and the simulation:
//!
//! - uniform `f64` in `[0, 1)`: top 53 bits of one word times `2^-53`;
//! - Bernoulli(`q`): one uniform, success iff `u < q` (so `q <= 0` never succeeds);
//! - index in `[0, n)`: `(word as u128 * n as u128) >> 64` (multiply-shift);
//! - sign: low bit of one word.
//!
//! Draw order inside one corral round is fixed: `rho_t`, then `i_t` (only when
//! `rho_t = 0`), then for each active base in slot order its `xi` and, when
//! `xi = 0`, its signed basis direction, then the exploration direction (only when
//! `rho_t = 1`).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of raw 64-bit words consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.inner.next_u64()
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&mut self, prob: f64) -> bool {
        self.uniform() < prob
    }

    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.next_u64() & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// A uniformly random element of `{±e_n}`: returns `(n, sign)`.
    #[inline]
    pub fn signed_basis(&mut self, d: usize) -> (usize, f64) {
        let n = self.index(d);
        (n, self.sign())
    }

    /// Standard normal via Box-Muller (two uniforms, cosine branch).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Sample an index from a probability vector (inverse CDF, left to right).
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding left the cumulative sum just under one.
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }

    /// Independent stream for a sub-task, derived from this stream's seed.
    pub fn fork(&self, salt: u64) -> Self {
        RngStream::new(self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}
