use super::config::streams;
use super::{derive_seed, Ctx, MetricsRow};
use crate::coord::Version;
use crate::envs::{collect_rollout, Env, Pacing};
use crate::error::{invalid, Result};
use crate::policy::GaussianPolicy;

/// Mean and population std of the undiscounted return over `episodes`
/// unpaced episodes acting with the policy mean. Episode `i` resets from a
/// seed derived from `(seed, i)`.
pub fn evaluate_policy(env: &dyn Env, policy: &GaussianPolicy, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(invalid("evaluation needs at least one episode"));
    }
    let mut returns = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut act = |s: &[f64]| policy.mean(s);
        let r = collect_rollout(env, &mut act, Pacing::Unpaced, derive_seed(seed, streams::EVAL, i as u64))?;
        returns.push(r.trajectory.return_undiscounted);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Evaluates the latest pushed policy on its own environment instance every
/// `eval_every` trajectories and at the final one.
pub struct Monitor {
    env: Box<dyn Env>,
    policy: GaussianPolicy,
    version: Version,
    episodes: usize,
    seed: u64,
    eval_every: u64,
    max_trajectories: u64,
}

impl Monitor {
    pub fn new(env: Box<dyn Env>, initial_policy: GaussianPolicy, episodes: usize, seed: u64, eval_every: u64, max_trajectories: u64) -> Self {
        Monitor {
            env,
            policy: initial_policy,
            version: Version(0),
            episodes,
            seed,
            eval_every,
            max_trajectories,
        }
    }

    pub fn due(&self, trajectories: u64) -> bool {
        trajectories % self.eval_every == 0 || trajectories == self.max_trajectories
    }

    pub fn record(&mut self, ctx: &Ctx, trajectories: u64) -> Result<()> {
        if let Some((blob, v)) = ctx.servers.policy.pull() {
            if v > self.version {
                self.policy.load_vectors(&blob.vectors()?)?;
                self.version = v;
            }
        }
        let (mean, std) = evaluate_policy(self.env.as_ref(), &self.policy, self.episodes, self.seed)?;
        let (real_env_steps, imagined_steps, val) = ctx.telemetry.counts();
        let now = ctx.clock.now();
        ctx.telemetry.row(MetricsRow {
            wall_clock_s: now,
            virtual_time_s: now,
            real_env_steps,
            trajectories,
            avg_eval_return: mean,
            std_eval_return: std,
            model_val_loss: val,
            model_version: ctx.servers.model.version().0,
            policy_version: self.version.0,
            imagined_steps,
        });
        Ok(())
    }
}
