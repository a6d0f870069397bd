//! Seeded random number generation.
//!
//! Generator `nirskit-chacha20-v1`, reproducible in any language:
//!
//! * ChaCha20 block function (20 rounds), 256-bit key = the 64-bit seed in
//!   little-endian order followed by 24 zero bytes, nonce/stream 0, counter
//!   starting at 0. Output words are consumed in block order.
//! * `next_u64` joins two consecutive 32-bit words, the first as the low half.
//! * Uniform `[0, 1)` doubles are `(next_u64 >> 11) · 2⁻⁵³`.
//! * Standard normals use Box–Muller on two uniforms `u1, u2`:
//!   `r = sqrt(−2·ln(1 − u1))`, yielding `r·cos(2πu2)` then `r·sin(2πu2)`.

use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

pub const GENERATOR_NAME: &str = "nirskit-chacha20-v1";

pub struct Rng {
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Rng { inner: ChaCha20Rng::from_seed(key), spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform double in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in `[lo, hi)`; returns `lo` when `lo == hi`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` by floor of a scaled uniform double.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n.saturating_sub(1))
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(1.0 - u1));
        let th = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(th));
        r * libm::cos(th)
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn uniforms(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform()).collect()
    }
}
