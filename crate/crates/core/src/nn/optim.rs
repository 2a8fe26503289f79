use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use super::{Network, Param, Real, Slot, Visit};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Warmup, then a constant base rate divided by `decay_factor` each time the
/// validation metric stalls for `patience` epochs (at most `max_drops` times).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub warmup_lr: f64,
    pub patience: usize,
    pub decay_factor: f64,
    pub max_drops: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            base_lr: 8e-5,
            warmup_epochs: 10,
            warmup_lr: 2e-5,
            patience: 100,
            decay_factor: 10.0,
            max_drops: 2,
        }
    }
}

impl LrSchedule {
    /// Constant rate, no warmup, no decay.
    pub fn constant(lr: f64) -> Self {
        Self {
            base_lr: lr,
            warmup_epochs: 0,
            warmup_lr: lr,
            patience: usize::MAX,
            decay_factor: 1.0,
            max_drops: 0,
        }
    }

    /// Number of decays triggered by a validation-metric history.
    pub fn drops(&self, val_history: &[f64]) -> usize {
        let mut best = f64::NEG_INFINITY;
        let mut stale = 0usize;
        let mut drops = 0usize;
        for &m in val_history {
            if m > best {
                best = m;
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.patience && drops < self.max_drops {
                    drops += 1;
                    stale = 0;
                }
            }
        }
        drops
    }

    /// Learning rate for `epoch` (0-based) given the metrics of all earlier
    /// epochs.
    pub fn lr(&self, epoch: usize, val_history: &[f64]) -> f64 {
        if epoch < self.warmup_epochs {
            return self.warmup_lr;
        }
        self.base_lr / self.decay_factor.powi(self.drops(val_history) as i32)
    }
}

/// Bias-corrected Adam state; moments are kept in parameter visit order.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub first_moment: Vec<ArrayD<T>>,
    pub second_moment: Vec<ArrayD<T>>,
    pub step: u64,
    pub lr: f64,
    pub schedule: LrSchedule,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(schedule: LrSchedule) -> Self {
        Self {
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step: 0,
            lr: schedule.lr(0, &[]),
            schedule,
        }
    }

    /// Updates `lr` from the schedule.
    pub fn set_epoch(&mut self, epoch: usize, val_history: &[f64]) {
        self.lr = self.schedule.lr(epoch, val_history);
    }

    /// One Adam update over `params` (in a fixed order across calls).
    pub fn step_params(&mut self, params: &mut [&mut Param<T>]) -> Result<()> {
        self.step += 1;
        for (i, p) in params.iter_mut().enumerate() {
            self.update(i, p)?;
        }
        Ok(())
    }

    fn update(&mut self, i: usize, p: &mut Param<T>) -> Result<()> {
        if i == self.first_moment.len() {
            self.first_moment.push(ArrayD::zeros(p.value.raw_dim()));
            self.second_moment.push(ArrayD::zeros(p.value.raw_dim()));
        }
        let (m, v) = match (self.first_moment.get_mut(i), self.second_moment.get_mut(i)) {
            (Some(m), Some(v)) => (m, v),
            _ => return Err(Error::ShapeMismatch(format!("optimizer has no slot {i}"))),
        };
        if m.shape() != p.value.shape() || p.grad.shape() != p.value.shape() {
            return Err(Error::ShapeMismatch(format!(
                "moment {:?} vs parameter {:?}",
                m.shape(),
                p.value.shape()
            )));
        }
        let t = self.step as i32;
        let (b1, b2) = (ADAM_BETA1, ADAM_BETA2);
        let step_size = T::of(self.lr / (1.0 - b1.powi(t)));
        let v_corr = T::of(1.0 / (1.0 - b2.powi(t)));
        let (b1, b2, eps) = (T::of(b1), T::of(b2), T::of(ADAM_EPS));
        let one = T::one();
        ndarray::Zip::from(&mut p.value)
            .and(&p.grad)
            .and(m)
            .and(v)
            .for_each(|w, &g, m, v| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *w -= step_size * *m / ((*v * v_corr).sqrt() + eps);
            });
        Ok(())
    }

    /// Adam update of every network parameter followed by recurrent clipping.
    pub fn step_network(&mut self, net: &mut Network<T>) -> Result<()> {
        self.step += 1;
        let mut i = 0;
        let mut result = Ok(());
        net.visit_mut("", &mut |_, slot| {
            if let Slot::Param(p) = slot {
                if result.is_ok() {
                    result = self.update(i, p);
                }
                i += 1;
            }
        });
        result?;
        net.clip_recurrent();
        Ok(())
    }
}
