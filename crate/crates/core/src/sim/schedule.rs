use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup followed by linear decay to zero at `total_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_rate: f64,
    pub warmup_fraction: f64,
    pub total_steps: u64,
}

impl LrSchedule {
    pub const DEFAULT_WARMUP_FRACTION: f64 = 0.03;

    pub fn new(base_rate: f64, warmup_fraction: f64, total_steps: u64) -> Result<Self> {
        let s = Self {
            base_rate,
            warmup_fraction,
            total_steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_rate.is_finite() && self.base_rate > 0.0) {
            return Err(Error::config(
                "schedule.base_rate",
                format!("must be finite and > 0, got {}", self.base_rate),
            ));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::config(
                "schedule.warmup_fraction",
                format!("must lie in [0, 1), got {}", self.warmup_fraction),
            ));
        }
        Ok(())
    }

    pub fn warmup_steps(&self) -> u64 {
        (self.warmup_fraction * self.total_steps as f64).ceil() as u64
    }

    /// Learning rate at 1-based step `t`. Zero at `t = 0` and for `t >= total_steps`.
    pub fn rate(&self, t: u64) -> f64 {
        let total = self.total_steps;
        let warmup = self.warmup_steps().min(total);
        if t == 0 || t >= total {
            return 0.0;
        }
        if t <= warmup {
            self.base_rate * t as f64 / warmup as f64
        } else {
            self.base_rate * (total - t) as f64 / (total - warmup) as f64
        }
    }
}
