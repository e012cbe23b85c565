//! Linear warmup into cosine decay.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub peak_lr: f64,
    /// Fraction of total steps spent ramping 0 -> peak.
    pub warmup_frac: f64,
    pub seed: u64,
    pub batch_size: usize,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
}

fn default_momentum() -> f64 {
    0.9
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.peak_lr.is_nan() || self.peak_lr < 0.0 {
            return Err(Error::InvalidArgument("peak_lr must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_frac) {
            return Err(Error::InvalidArgument(
                "warmup fraction must be in [0, 1]".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn warmup_steps(&self, total_steps: usize) -> usize {
        (self.warmup_frac * total_steps as f64).floor() as usize
    }
}

/// Learning rate for `step` in `0..total_steps`: linear ramp 0 -> peak over
/// the warmup steps, then `peak * 0.5 * (1 + cos(pi * progress))` reaching 0
/// at the final step.
pub fn lr_at(step: usize, total_steps: usize, sched: &TrainSchedule) -> Result<f64> {
    if step >= total_steps {
        return Err(Error::InvalidArgument(format!(
            "step {step} out of range 0..{total_steps}"
        )));
    }
    let warmup = sched.warmup_steps(total_steps);
    if step < warmup {
        return Ok(sched.peak_lr * step as f64 / warmup as f64);
    }
    let decay_span = total_steps - warmup;
    let progress = if decay_span > 1 {
        (step - warmup) as f64 / (decay_span - 1) as f64
    } else {
        1.0
    };
    Ok(sched.peak_lr * 0.5 * (1.0 + (PI * progress).cos()))
}
