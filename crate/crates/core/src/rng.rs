//! Seeded random streams with counter-based splitting.
//!
//! Every stochastic component in the crate draws from an [`Rng`]. A stream is
//! fully determined by its 64-bit seed, and `split` derives independent
//! sub-streams so that concurrent consumers (sampler, trainer, optimizer)
//! never interleave draws.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates derived seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic random stream. Identical seeds produce identical sequences.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    splits: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            splits: 0,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent sub-stream. Each call yields a distinct stream;
    /// the parent stream is left untouched apart from its split counter.
    pub fn split(&mut self) -> Rng {
        self.splits += 1;
        Rng::new(mix(self.seed ^ mix(self.splits)))
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is negligible for the desk-scale n used here.
        (self.inner.next_u64() % n as u64) as usize
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        rand::Rng::sample::<f64, _>(&mut self.inner, rand_distr::StandardNormal)
    }

    /// Exponential draw with unit rate.
    pub fn exponential(&mut self) -> f64 {
        rand::Rng::sample::<f64, _>(&mut self.inner, rand_distr::Exp1)
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
