use crate::{Error, Result};

/// Poly decay: `base_lr * (1 - iter / max_iters)^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolySchedule {
    pub base_lr: f64,
    pub max_iters: u64,
    pub power: f64,
}

impl PolySchedule {
    pub fn new(base_lr: f64, max_iters: u64) -> Result<Self> {
        Self::with_power(base_lr, max_iters, 0.9)
    }

    pub fn with_power(base_lr: f64, max_iters: u64, power: f64) -> Result<Self> {
        if !(base_lr >= 0.0) || max_iters == 0 || !(power > 0.0) {
            return Err(Error::Config(alloc::format!(
                "poly schedule needs base_lr >= 0, max_iters > 0, power > 0 (got {base_lr}, {max_iters}, {power})"
            )));
        }
        Ok(Self { base_lr, max_iters, power })
    }

    /// Learning rate at `iter`. Iterations past `max_iters` clamp to zero.
    pub fn lr(&self, iter: u64) -> f64 {
        if iter > self.max_iters {
            log::warn!("poly schedule queried at iter {iter} > max_iters {}; using 0", self.max_iters);
            return 0.0;
        }
        let frac = 1.0 - iter as f64 / self.max_iters as f64;
        self.base_lr * num_traits::Float::powf(frac, self.power)
    }
}
