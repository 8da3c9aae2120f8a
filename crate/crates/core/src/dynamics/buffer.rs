use std::collections::VecDeque;

use crate::envs::Trajectory;
use crate::error::{ensure_len, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub s_next: Vec<f64>,
    pub split: Split,
}

/// Fixed-capacity FIFO of real transitions, the model learner's local dataset.
///
/// Every `⌊1/validation_fraction⌋`-th incoming transition (counted over the
/// whole stream) is held out for validation.
#[derive(Debug, Clone)]
pub struct DatasetBuffer {
    obs_dim: usize,
    act_dim: usize,
    capacity: usize,
    validation_stride: Option<u64>,
    samples: VecDeque<Sample>,
    seen: u64,
}

impl DatasetBuffer {
    pub fn new(obs_dim: usize, act_dim: usize, capacity: usize, validation_fraction: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("buffer capacity must be positive"));
        }
        if !(0.0..1.0).contains(&validation_fraction) {
            return Err(invalid(format!(
                "validation fraction must lie in [0, 1), got {validation_fraction}"
            )));
        }
        let validation_stride = (validation_fraction > 0.0).then(|| (1.0 / validation_fraction).floor() as u64);
        Ok(DatasetBuffer {
            obs_dim,
            act_dim,
            capacity,
            validation_stride,
            samples: VecDeque::with_capacity(capacity),
            seen: 0,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total transitions ever appended, including evicted ones.
    pub fn total_seen(&self) -> u64 {
        self.seen
    }

    /// Appends every transition of `trajectory`, evicting the oldest entries
    /// beyond capacity. Nothing is appended if any transition is malformed.
    pub fn append(&mut self, trajectory: &Trajectory) -> Result<()> {
        for tr in &trajectory.transitions {
            ensure_len("transition s", tr.s.len(), self.obs_dim)?;
            ensure_len("transition a", tr.a.len(), self.act_dim)?;
            ensure_len("transition s_next", tr.s_next.len(), self.obs_dim)?;
        }
        for tr in &trajectory.transitions {
            self.seen += 1;
            let split = match self.validation_stride {
                Some(stride) if self.seen % stride == 0 => Split::Validation,
                _ => Split::Train,
            };
            if self.samples.len() == self.capacity {
                self.samples.pop_front();
            }
            self.samples.push_back(Sample {
                s: tr.s.clone(),
                a: tr.a.clone(),
                s_next: tr.s_next.clone(),
                split,
            });
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// The `n` most recent states (all splits), newest last.
    pub fn recent_states(&self, n: usize) -> Vec<Vec<f64>> {
        let skip = self.samples.len().saturating_sub(n);
        self.samples.iter().skip(skip).map(|s| s.s.clone()).collect()
    }
}
