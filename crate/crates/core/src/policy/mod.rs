//! Gaussian policy, value function, imagined rollouts and the PPO-clip step.

mod batch;
mod nets;
mod ppo;

pub use batch::{compute_gae, imagine_rollouts, BatchBuilder, ImaginedBatch};
pub use nets::{GaussianPolicy, ValueFunction, POLICY_LOG_STD_MAX, POLICY_LOG_STD_MIN};
pub use ppo::{clipped_surrogate, ppo_update, surrogate_gradient, surrogate_objective, PpoOptimizer, PpoStats};

use crate::envs::Trajectory;
use crate::error::{invalid, Result};
use crate::nn::Activation;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub imagined_horizon: usize,
    pub imagined_batch_paths: usize,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub entropy_coef: f64,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub activation: Activation,
    pub init_log_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            imagined_horizon: 50,
            imagined_batch_paths: 32,
            policy_lr: 1e-3,
            value_lr: 1e-3,
            entropy_coef: 0.0,
            policy_hidden: vec![64, 64],
            value_hidden: vec![64, 64],
            activation: Activation::Relu,
            init_log_std: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(invalid(format!("gae_lambda must lie in [0, 1], got {}", self.gae_lambda)));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(invalid(format!("clip_eps must lie in (0, 1), got {}", self.clip_eps)));
        }
        if self.imagined_horizon == 0 || self.imagined_batch_paths == 0 {
            return Err(invalid("imagined horizon and batch paths must be positive"));
        }
        for (name, lr) in [("policy_lr", self.policy_lr), ("value_lr", self.value_lr)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(invalid(format!("{name} must be finite and non-negative, got {lr}")));
            }
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(invalid("entropy_coef must be finite and non-negative"));
        }
        Ok(())
    }
}

/// `Σ_t γ^t r_t` over the trajectory's rewards.
pub fn discounted_return(trajectory: &Trajectory, gamma: f64) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(invalid("discounted return of an empty trajectory"));
    }
    Ok(discounted_sum(trajectory.rewards(), gamma))
}

pub(crate) fn discounted_sum(rewards: impl Iterator<Item = f64>, gamma: f64) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total
}
