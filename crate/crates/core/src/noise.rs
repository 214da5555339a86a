//! Reproducible Wiener increments, one independent stream per trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Normal variates for trajectory `trajectory_index` of a run seeded with
/// `master_seed`. ChaCha is counter based, so the i-th draw of a stream
/// does not depend on how trajectories are scheduled.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    pub master_seed: u64,
    pub trajectory_index: u64,
    rng: ChaCha20Rng,
}

impl NoiseStream {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(trajectory_index);
        NoiseStream { master_seed, trajectory_index, rng }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// dW ~ N(0, dt).
    pub fn dw(&mut self, dt: f64) -> f64 {
        self.standard_normal() * dt.sqrt()
    }
}

/// Largest allowed k·dt.
pub const MAX_K_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    pub k: f64,
}

impl StepParams {
    pub fn new(dt: f64, k: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParam { key: "dt", msg: format!("must be positive, got {dt}") });
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParam { key: "k", msg: format!("must be positive, got {k}") });
        }
        if k * dt > MAX_K_DT * (1.0 + 1e-12) {
            return Err(Error::InvalidParam { key: "dt", msg: "k·dt exceeds 0.01".into() });
        }
        Ok(StepParams { dt, k })
    }
}
