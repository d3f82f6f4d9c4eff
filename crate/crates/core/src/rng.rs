//! Counter-addressed pseudo-random streams.
//!
//! All randomness in the crate is drawn from ChaCha8 keyed by a 64-bit seed and
//! addressed by `(stream, word position)`. A draw is therefore a pure function
//! of `(seed, stream, index)`: it does not matter which thread asks, or in what
//! order, which is what makes parallel runs reproducible.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream identifiers. Distinct purposes never share a stream.
pub mod domain {
    pub const BROWNIAN: u64 = 0;
    pub const PAIR_SEEDS: u64 = 1;
    pub const PREPARATION: u64 = 2;
    pub const JOINT_ORACLE: u64 = 3;
    pub const STATION_LOCAL: u64 = 4;
    pub const DISTURBANCE: u64 = 5;
    pub const INITIAL_CONDITIONS: u64 = 6;
}

/// Derives an independent child seed from `(seed, domain, index)`.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(domain);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

/// A seekable stream of 64-bit words.
#[derive(Clone, Debug)]
pub struct CounterStream {
    rng: ChaCha8Rng,
}

impl CounterStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Positions the stream at the `index`-th 64-bit word.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(u128::from(index) * 2);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn next_unit_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller; always consumes exactly two words.
    pub fn next_standard_normal(&mut self) -> f64 {
        let u1 = self.next_unit_open0();
        let u2 = self.next_unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
