use rand::Rng;

use super::config::streams;
use super::{derive_seed, Begin, Ctx, Worker, WorkerKind};
use crate::coord::{ParamBlob, Version};
use crate::dynamics::Ensemble;
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::policy::{imagine_rollouts, ppo_update, GaussianPolicy, PpoOptimizer, TrainConfig, ValueFunction};
use crate::SimRng;

/// Consecutive skipped updates after which the model is re-pulled.
const MAX_SKIPS: u32 = 3;

/// Pulls `φ`, imagines a fresh batch, takes one PPO step, pushes `θ`.
/// Idles until the first model is published.
pub struct PolicyWorker {
    reward_env: Box<dyn Env>,
    policy: GaussianPolicy,
    value_fn: ValueFunction,
    opt: PpoOptimizer,
    cfg: TrainConfig,
    model: Option<Ensemble>,
    model_version: Version,
    rng: SimRng,
    init_state_window: usize,
    grad_step_duration: f64,
    pending: Option<ParamBlob>,
    skips: u32,
    respect_stop: bool,
}

impl PolicyWorker {
    /// `reward_env` supplies only the known reward function and action bounds.
    pub fn new(
        reward_env: Box<dyn Env>,
        policy: GaussianPolicy,
        value_fn: ValueFunction,
        cfg: &TrainConfig,
        run_seed: u64,
        init_state_window: usize,
        grad_step_duration: f64,
    ) -> Self {
        PolicyWorker {
            reward_env,
            opt: PpoOptimizer::new(&policy, &value_fn, cfg),
            policy,
            value_fn,
            cfg: cfg.clone(),
            model: None,
            model_version: Version(0),
            rng: crate::envs::seeded_rng(derive_seed(run_seed, streams::POLICY, 0)),
            init_state_window,
            grad_step_duration,
            pending: None,
            skips: 0,
            respect_stop: true,
        }
    }

    pub fn ignoring_stop(mut self) -> Self {
        self.respect_stop = false;
        self
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }

    pub fn model_version(&self) -> Version {
        self.model_version
    }
}

impl Worker for PolicyWorker {
    fn kind(&self) -> WorkerKind {
        WorkerKind::Policy
    }

    fn nominal_duration(&self) -> f64 {
        self.grad_step_duration
    }

    fn begin(&mut self, ctx: &Ctx) -> Result<Begin> {
        if self.respect_stop && ctx.servers.stop_reached() {
            return Ok(Begin::Done);
        }
        let Some((blob, v)) = ctx.servers.model.pull() else {
            return Ok(Begin::Idle);
        };
        if v > self.model_version || self.model.is_none() {
            self.model = Some(Ensemble::from_vectors(&blob.vectors()?)?);
            self.model_version = v;
        }
        ctx.telemetry.event(ctx.clock.now(), WorkerKind::Policy, "pull_model", self.model_version.0);
        let recent = ctx.servers.data.recent_states(self.init_state_window);
        if recent.is_empty() {
            return Ok(Begin::Idle);
        }
        let starts: Vec<Vec<f64>> = (0..self.cfg.imagined_batch_paths)
            .map(|_| recent[self.rng.random_range(0..recent.len())].clone())
            .collect();
        let model = self.model.as_ref().expect("model loaded");
        let spec = self.reward_env.spec().clone();
        let outcome = imagine_rollouts(
            &self.policy,
            &self.value_fn,
            model,
            self.reward_env.as_ref(),
            &spec,
            &starts,
            self.cfg.imagined_horizon,
            &self.cfg,
            &mut self.rng,
        )
        .and_then(|batch| {
            let stats = ppo_update(&mut self.policy, &mut self.value_fn, &batch, &self.cfg, &mut self.opt)?;
            Ok((batch, stats))
        });
        let skipped = match outcome {
            Ok((batch, stats)) => match stats.skipped {
                None => {
                    if batch.truncated_paths > 0 {
                        ctx.telemetry.incident(format!("{} imagined paths truncated", batch.truncated_paths));
                    }
                    ctx.telemetry.policy_step(batch.len() as u64, self.model_version.0);
                    ctx.telemetry.event(ctx.clock.now(), WorkerKind::Policy, "grad_step", self.model_version.0);
                    self.pending = Some(ParamBlob::from_vectors(&self.policy.to_vectors()));
                    self.skips = 0;
                    None
                }
                Some(msg) => Some(msg),
            },
            Err(Error::Numeric(msg)) => Some(msg),
            Err(e) => return Err(e),
        };
        if let Some(msg) = skipped {
            ctx.telemetry.incident(format!("policy update skipped: {msg}"));
            self.pending = None;
            self.skips += 1;
            if self.skips >= MAX_SKIPS {
                self.model = None;
                self.skips = 0;
            }
        }
        Ok(Begin::Work(self.grad_step_duration))
    }

    fn finish(&mut self, ctx: &Ctx) -> Result<()> {
        if let Some(blob) = self.pending.take() {
            let v = ctx.servers.policy.push(blob)?;
            ctx.telemetry.event(ctx.clock.now(), WorkerKind::Policy, "push_policy", v.0);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Ensemble;
    use crate::envs::make_env;
    use crate::workers::testing::{push_rollouts, servers, tiny_config};
    use crate::workers::{Clock, RunConfig, RunMode, Telemetry};

    fn worker(cfg: &RunConfig) -> PolicyWorker {
        let env = make_env(&cfg.env, cfg.dt, cfg.horizon).unwrap();
        let mut rng = crate::envs::seeded_rng(1);
        let policy = GaussianPolicy::new(4, 2, &cfg.train, &mut rng).unwrap();
        let value_fn = ValueFunction::new(4, &cfg.train, &mut rng).unwrap();
        PolicyWorker::new(env, policy, value_fn, &cfg.train, cfg.seed, cfg.init_state_window, 0.1)
    }

    fn publish_model(cfg: &RunConfig, servers: &crate::workers::Servers) {
        let mut rng = crate::envs::seeded_rng(2);
        let ens = Ensemble::new(4, 2, &cfg.model.ensemble, &mut rng).unwrap();
        servers.model.push(ParamBlob::from_vectors(&ens.to_vectors())).unwrap();
    }

    #[test]
    fn idles_without_a_model() {
        let cfg = tiny_config(RunMode::AsyncVirtual, 5);
        let servers = servers(&cfg);
        push_rollouts(&cfg, &servers, 1);
        let telemetry = Telemetry::new();
        let ctx = Ctx { servers: &servers, telemetry: &telemetry, clock: Clock::Virtual(0.0) };
        let mut w = worker(&cfg);
        assert_eq!(w.begin(&ctx).unwrap(), Begin::Idle);
        assert_eq!(servers.policy.version().0, 0);
    }

    #[test]
    fn ten_steps_push_ten_versions() {
        let cfg = tiny_config(RunMode::AsyncVirtual, 5);
        let servers = servers(&cfg);
        push_rollouts(&cfg, &servers, 1);
        publish_model(&cfg, &servers);
        let telemetry = Telemetry::new();
        let ctx = Ctx { servers: &servers, telemetry: &telemetry, clock: Clock::Virtual(0.0) };
        let mut w = worker(&cfg);
        let before = w.policy().to_vectors();
        for _ in 0..10 {
            assert_eq!(w.begin(&ctx).unwrap(), Begin::Work(0.1));
            w.finish(&ctx).unwrap();
        }
        assert_eq!(servers.policy.version().0, 10);
        assert_eq!(w.model_version().0, 1);
        let (blob, _) = servers.policy.pull().unwrap();
        assert_eq!(blob.vectors().unwrap(), w.policy().to_vectors());
        assert_ne!(before, w.policy().to_vectors());
        let m = telemetry.into_metrics();
        assert_eq!(m.summary.policy_steps, 10);
        // Each step imagines batch_paths × horizon transitions.
        assert_eq!(m.summary.imagined_steps, 10 * 4 * 5);
        assert_eq!(m.summary.step_model_versions, vec![1; 10]);
    }

    #[test]
    fn newer_models_are_reloaded() {
        let cfg = tiny_config(RunMode::AsyncVirtual, 5);
        let servers = servers(&cfg);
        push_rollouts(&cfg, &servers, 1);
        publish_model(&cfg, &servers);
        let telemetry = Telemetry::new();
        let ctx = Ctx { servers: &servers, telemetry: &telemetry, clock: Clock::Virtual(0.0) };
        let mut w = worker(&cfg);
        w.begin(&ctx).unwrap();
        w.finish(&ctx).unwrap();
        publish_model(&cfg, &servers);
        w.begin(&ctx).unwrap();
        assert_eq!(w.model_version().0, 2);
    }
}
