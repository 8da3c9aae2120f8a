use super::config::streams;
use super::{derive_seed, Begin, Ctx, Monitor, Worker, WorkerKind};
use crate::coord::Version;
use crate::envs::{collect_rollout, Env, Pacing, Trajectory};
use crate::error::{Error, Result};
use crate::policy::GaussianPolicy;
use crate::SimRng;

/// Pulls `θ`, collects one rollout with the stochastic policy, pushes it.
/// Starts from the seeded initial policy until a policy is published.
pub struct DataWorker {
    env: Box<dyn Env>,
    policy: GaussianPolicy,
    version: Version,
    rng: SimRng,
    run_seed: u64,
    next_index: u64,
    pacing: Pacing,
    pending: Option<(Trajectory, Version)>,
    monitor: Option<Monitor>,
}

impl DataWorker {
    pub fn new(env: Box<dyn Env>, initial_policy: GaussianPolicy, run_seed: u64, pacing: Pacing) -> Self {
        DataWorker {
            env,
            policy: initial_policy,
            version: Version(0),
            rng: crate::envs::seeded_rng(derive_seed(run_seed, streams::DATA, 0)),
            run_seed,
            next_index: 0,
            pacing,
            pending: None,
            monitor: None,
        }
    }

    pub fn with_monitor(mut self, monitor: Monitor) -> Self {
        self.monitor = Some(monitor);
        self
    }

    pub fn monitor_mut(&mut self) -> Option<&mut Monitor> {
        self.monitor.as_mut()
    }

    /// Seed of the `index`-th rollout's initial state; shared by every mode.
    pub fn env_seed(run_seed: u64, index: u64) -> u64 {
        derive_seed(run_seed, streams::ENV, index)
    }

    fn rollout_duration(&self) -> f64 {
        self.env.spec().rollout_duration(self.pacing.speed_multiplier())
    }
}

impl Worker for DataWorker {
    fn kind(&self) -> WorkerKind {
        WorkerKind::Data
    }

    fn nominal_duration(&self) -> f64 {
        self.rollout_duration()
    }

    fn begin(&mut self, ctx: &Ctx) -> Result<Begin> {
        if ctx.servers.stop_reached() {
            return Ok(Begin::Done);
        }
        if let Some((blob, v)) = ctx.servers.policy.pull() {
            if v > self.version {
                self.policy.load_vectors(&blob.vectors()?)?;
                self.version = v;
            }
        }
        ctx.telemetry.event(ctx.clock.now(), WorkerKind::Data, "pull_policy", self.version.0);
        let seed = Self::env_seed(self.run_seed, self.next_index);
        self.next_index += 1;
        let (policy, rng) = (&self.policy, &mut self.rng);
        let mut act = |s: &[f64]| policy.sample_action(s, rng).map(|(a, _)| a);
        match collect_rollout(self.env.as_ref(), &mut act, self.pacing, seed) {
            Ok(r) => {
                self.pending = Some((r.trajectory, self.version));
                Ok(Begin::Work(r.virtual_duration))
            }
            Err(Error::Numeric(msg)) => {
                ctx.telemetry.incident(format!("rollout {} discarded: {msg}", self.next_index - 1));
                self.pending = None;
                Ok(Begin::Work(self.rollout_duration()))
            }
            Err(e) => Err(e),
        }
    }

    fn finish(&mut self, ctx: &Ctx) -> Result<()> {
        let Some((traj, version)) = self.pending.take() else {
            return Ok(());
        };
        let steps = traj.len() as u64;
        let env_seed = traj.env_seed;
        let total = ctx.servers.data.push(traj)?;
        ctx.telemetry.rollout_pushed(steps, version.0, env_seed);
        ctx.telemetry.event(ctx.clock.now(), WorkerKind::Data, "push_trajectory", total);
        if let Some(m) = self.monitor.as_mut() {
            if m.due(total) {
                m.record(ctx, total)?;
            }
        }
        Ok(())
    }
}
