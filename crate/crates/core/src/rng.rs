//! Counter-based SplitMix64.
//!
//! The n-th output of a stream with key `k` is `mix(k + n * GAMMA)`, where
//! `mix` is the SplitMix64 finalizer. Streams split by hashing a stream id
//! into a fresh key, so per-seed / per-architecture / per-sample randomness
//! never depends on how many numbers another stream consumed.
//!
//! Floats take the top 53 bits. Gaussians use Box-Muller with the cosine
//! branch only (one output per two uniforms, no cached state).

use core::f64::consts::PI;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    key: u64,
    ctr: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { key: seed, ctr: 0 }
    }

    /// Independent child stream. Does not advance `self`.
    pub fn split(&self, stream: u64) -> Rng {
        Rng { key: mix(self.key ^ mix(stream.wrapping_add(GAMMA))), ctr: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.ctr = self.ctr.wrapping_add(1);
        mix(self.key.wrapping_add(self.ctr.wrapping_mul(GAMMA)))
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
    }

    /// Uniform integer in [0, n). `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}
