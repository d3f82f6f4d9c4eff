use nalgebra::Vector3;

use crate::rng::{domain, CounterStream};

/// Per-trajectory Gaussian force stream.
///
/// The force for step `t` is read from a fixed window of the stream, so it is
/// a pure function of `(seed, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianSource {
    pub seed: u64,
    /// Standard deviation of each component.
    pub sigma: f64,
}

impl BrownianSource {
    pub fn new(seed: u64, sigma: f64) -> Self {
        Self { seed, sigma }
    }

    pub fn sample(&self, t: u64) -> Vector3<f64> {
        if self.sigma == 0.0 {
            return Vector3::zeros();
        }
        let mut s = CounterStream::new(self.seed, domain::BROWNIAN);
        // Three Box–Muller normals, two words each.
        s.seek(t * 6);
        Vector3::from_fn(|_, _| self.sigma * s.next_standard_normal())
    }

    /// Standard normal `g` used for the force at step `t`, x component;
    /// equals `sample(t).x / sigma` whenever `sigma > 0`.
    pub fn unit_draw(&self, t: u64) -> f64 {
        let mut s = CounterStream::new(self.seed, domain::BROWNIAN);
        s.seek(t * 6);
        s.next_standard_normal()
    }
}
