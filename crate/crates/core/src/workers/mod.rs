//! Data collection, model learning and policy improvement workers, the run
//! modes that drive them, and the virtual-time scheduler.

mod config;
mod data;
mod eval;
mod model;
mod modes;
mod policy;
mod scheduler;
mod telemetry;

pub use config::{derive_seed, streams, AblationParams, CostModel, ModelConfig, RunConfig, RunMode, StopCriterion};
pub use data::DataWorker;
pub use eval::{evaluate_policy, Monitor};
pub use model::ModelWorker;
pub use modes::{run, run_async, run_model_free, run_partial_model_policy, run_partial_policy_data, run_sync};
pub use policy::PolicyWorker;
pub use scheduler::{virtual_scheduler, Begin, Worker};
pub use telemetry::{MetricsRow, RunMetrics, RunSummary, Telemetry, TraceEvent, WorkerKind};

use std::time::Instant;

use crate::coord::{DataBufferServer, ParamServer};

/// The only state workers share.
#[derive(Debug)]
pub struct Servers {
    pub policy: ParamServer,
    pub model: ParamServer,
    pub data: DataBufferServer,
    pub stop: StopCriterion,
}

impl Servers {
    pub fn stop_reached(&self) -> bool {
        self.data.total_pushed() >= self.stop.max_trajectories
    }
}

/// Time source for trace events and metrics rows.
#[derive(Debug, Clone, Copy)]
pub enum Clock {
    Virtual(f64),
    Real(Instant),
}

impl Clock {
    pub fn now(&self) -> f64 {
        match *self {
            Clock::Virtual(t) => t,
            Clock::Real(start) => start.elapsed().as_secs_f64(),
        }
    }
}

/// What a worker sees during one operation.
pub struct Ctx<'a> {
    pub servers: &'a Servers,
    pub telemetry: &'a Telemetry,
    pub clock: Clock,
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// A point-mass run small enough for unit tests.
    pub(crate) fn tiny_config(mode: RunMode, max_trajectories: u64) -> RunConfig {
        let mut cfg = RunConfig {
            env: "point_mass".into(),
            horizon: 20,
            mode,
            stop: StopCriterion { max_trajectories },
            eval_every: 2,
            eval_episodes: 2,
            init_state_window: 200,
            ..RunConfig::default()
        };
        cfg.train.policy_hidden = vec![8];
        cfg.train.value_hidden = vec![8];
        cfg.train.imagined_batch_paths = 4;
        cfg.train.imagined_horizon = 5;
        cfg.model.ensemble.k = 2;
        cfg.model.ensemble.hidden = vec![8];
        cfg.model.ensemble.batch_size = 16;
        cfg.model.max_epochs_per_iteration = 4;
        cfg.ablation = AblationParams { n: 2, e: 2, g: 3 };
        cfg
    }

    pub(crate) fn servers(cfg: &RunConfig) -> Servers {
        let env = crate::envs::make_env(&cfg.env, cfg.dt, cfg.horizon).unwrap();
        let spec = env.spec();
        Servers {
            policy: ParamServer::new(),
            model: ParamServer::new(),
            data: DataBufferServer::new(spec.obs_dim, spec.act_dim, spec.horizon, cfg.init_state_window)
                .with_limit(cfg.stop.max_trajectories),
            stop: cfg.stop,
        }
    }

    /// One rollout of the zero-mean initial policy for seeding a buffer.
    pub(crate) fn push_rollouts(cfg: &RunConfig, servers: &Servers, n: u64) {
        let env = crate::envs::make_env(&cfg.env, cfg.dt, cfg.horizon).unwrap();
        for i in 0..n {
            let act_dim = env.spec().act_dim;
            let mut act = |_: &[f64]| Ok(vec![0.3; act_dim]);
            let r = crate::envs::collect_rollout(env.as_ref(), &mut act, crate::envs::Pacing::Unpaced, i).unwrap();
            servers.data.push(r.trajectory).unwrap();
        }
    }

    /// Run-length encoding of trace ops, e.g. `[("epoch", 2), ("grad_step", 3)]`.
    pub(crate) fn op_runs(events: &[TraceEvent], keep: &[&str]) -> Vec<(&'static str, usize)> {
        let mut runs: Vec<(&'static str, usize)> = Vec::new();
        for e in events.iter().filter(|e| keep.contains(&e.op)) {
            match runs.last_mut() {
                Some((op, n)) if *op == e.op => *n += 1,
                _ => runs.push((e.op, 1)),
            }
        }
        runs
    }
}
