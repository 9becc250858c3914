//! Gaussian noise with static or decaying variance.
//!
//! In dynamic mode the noise standard deviation at step `k` is `sigma / sqrt(k)`,
//! so the variance is `sigma^2 / k`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    /// Base standard deviation.
    pub sigma_eps: f64,
    pub mode: ScheduleMode,
}

impl NoiseSchedule {
    pub fn new(sigma_eps: f64, mode: ScheduleMode) -> Result<Self> {
        if !(sigma_eps.is_finite() && sigma_eps >= 0.0) {
            return config(format!("sigma_eps must be finite and nonnegative, got {sigma_eps}"));
        }
        Ok(Self { sigma_eps, mode })
    }

    /// Noise variance at step `k >= 1`.
    pub fn variance_at(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return config("noise step index starts at 1");
        }
        let base = self.sigma_eps * self.sigma_eps;
        Ok(match self.mode {
            ScheduleMode::Static => base,
            ScheduleMode::Dynamic => base / k as f64,
        })
    }

    pub fn std_at(&self, k: u64) -> Result<f64> {
        self.variance_at(k).map(f64::sqrt)
    }

    /// `sum_{k=1}^{steps} variance_at(k)`.
    pub fn schedule_sum(&self, steps: u64) -> Result<f64> {
        Ok(*self.cumulative_sums(steps)?.last().expect("steps >= 1"))
    }

    /// Prefix sums `[S_1, ..., S_steps]` with `S_K = sum_{k<=K} variance_at(k)`,
    /// accumulated in step order.
    pub fn cumulative_sums(&self, steps: u64) -> Result<Vec<f64>> {
        if steps == 0 {
            return config("schedule sum needs at least one step");
        }
        let mut acc = 0.0;
        (1..=steps)
            .map(|k| {
                acc += self.variance_at(k)?;
                Ok(acc)
            })
            .collect()
    }

    /// I.i.d. `N(0, variance_at(k))` vector of length `p`.
    pub fn sample<R: Rng + ?Sized>(&self, k: u64, p: usize, rng: &mut R) -> Result<Vec<f64>> {
        if p == 0 {
            return config("noise dimension must be positive");
        }
        let std = self.std_at(k)?;
        Ok((0..p)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                std * z
            })
            .collect())
    }
}
