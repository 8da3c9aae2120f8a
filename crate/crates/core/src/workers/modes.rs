use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use super::config::streams;
use super::{
    derive_seed, virtual_scheduler, Begin, Clock, Ctx, DataWorker, ModelWorker, Monitor, PolicyWorker, RunConfig, RunMetrics,
    RunMode, Servers, Telemetry, Worker, WorkerKind,
};
use crate::coord::{DataBufferServer, ParamBlob, ParamServer};
use crate::envs::{make_env, Env, Pacing};
use crate::error::{invalid, Error, Result};
use crate::policy::{ppo_update, BatchBuilder, GaussianPolicy, PpoOptimizer, ValueFunction};

struct Parts {
    data: DataWorker,
    model: ModelWorker,
    policy: PolicyWorker,
}

fn env_for(cfg: &RunConfig) -> Result<Box<dyn Env>> {
    make_env(&cfg.env, cfg.dt, cfg.horizon)
}

fn initial_nets(cfg: &RunConfig, obs_dim: usize, act_dim: usize) -> Result<(GaussianPolicy, ValueFunction)> {
    let mut rng = crate::envs::seeded_rng(derive_seed(cfg.seed, streams::INIT, 0));
    let policy = GaussianPolicy::new(obs_dim, act_dim, &cfg.train, &mut rng)?;
    let value_fn = ValueFunction::new(obs_dim, &cfg.train, &mut rng)?;
    Ok((policy, value_fn))
}

fn build(cfg: &RunConfig, pacing: Pacing) -> Result<(Servers, Parts)> {
    cfg.validate()?;
    let env = env_for(cfg)?;
    let spec = env.spec().clone();
    let (policy, value_fn) = initial_nets(cfg, spec.obs_dim, spec.act_dim)?;
    let monitor = Monitor::new(
        env_for(cfg)?,
        policy.clone(),
        cfg.eval_episodes,
        derive_seed(cfg.seed, streams::EVAL, 0),
        cfg.eval_every,
        cfg.stop.max_trajectories,
    );
    let data = DataWorker::new(env, policy.clone(), cfg.seed, pacing).with_monitor(monitor);
    let model = ModelWorker::new(spec.obs_dim, spec.act_dim, &cfg.model, cfg.seed, cfg.cost.epoch_duration)?;
    let policy = PolicyWorker::new(
        env_for(cfg)?,
        policy,
        value_fn,
        &cfg.train,
        cfg.seed,
        cfg.init_state_window,
        cfg.cost.grad_step_duration,
    );
    let servers = Servers {
        policy: ParamServer::new(),
        model: ParamServer::new(),
        data: DataBufferServer::new(spec.obs_dim, spec.act_dim, spec.horizon, cfg.init_state_window)
            .with_limit(cfg.stop.max_trajectories),
        stop: cfg.stop,
    };
    Ok((servers, Parts { data, model, policy }))
}

fn record_initial(data: &mut DataWorker, servers: &Servers, telemetry: &Telemetry, clock: Clock) -> Result<()> {
    let ctx = Ctx { servers, telemetry, clock };
    if let Some(m) = data.monitor_mut() {
        m.record(&ctx, 0)?;
    }
    Ok(())
}

fn finalize(telemetry: Telemetry, servers: &Servers, end_time: f64) -> RunMetrics {
    let mut m = telemetry.into_metrics();
    m.summary.wall_clock_s = end_time;
    m.summary.virtual_time_s = end_time;
    m.summary.model_pushes = servers.model.version().0;
    m.summary.policy_pushes = servers.policy.version().0;
    m
}

/// Dispatches on `cfg.mode`.
pub fn run(cfg: &RunConfig) -> Result<RunMetrics> {
    match cfg.mode {
        RunMode::AsyncRealtime | RunMode::AsyncVirtual => run_async(cfg),
        RunMode::Sync => run_sync(cfg),
        RunMode::PartialModelPolicy => run_partial_model_policy(cfg),
        RunMode::PartialPolicyData => run_partial_policy_data(cfg),
        RunMode::ModelFree => run_model_free(cfg),
    }
}

/// The three workers as concurrent activities: one thread each in real time
/// (model and policy share one when `ASYNCDYNA_THREADS` is at most 2), or
/// interleaved by the virtual scheduler.
pub fn run_async(cfg: &RunConfig) -> Result<RunMetrics> {
    match cfg.mode {
        RunMode::AsyncVirtual => {
            let pacing = Pacing::Virtual {
                speed_multiplier: cfg.speed_multiplier,
            };
            let (servers, mut p) = build(cfg, pacing)?;
            let telemetry = Telemetry::new();
            record_initial(&mut p.data, &servers, &telemetry, Clock::Virtual(0.0))?;
            let end = virtual_scheduler(
                &mut [&mut p.data, &mut p.model, &mut p.policy],
                &servers,
                &telemetry,
                derive_seed(cfg.seed, streams::SCHEDULER, 0),
            )?;
            Ok(finalize(telemetry, &servers, end))
        }
        RunMode::AsyncRealtime => {
            let pacing = Pacing::RealTime {
                speed_multiplier: cfg.speed_multiplier,
            };
            let (servers, mut p) = build(cfg, pacing)?;
            let telemetry = Telemetry::new();
            let start = Instant::now();
            record_initial(&mut p.data, &servers, &telemetry, Clock::Real(start))?;
            let abort = AtomicBool::new(false);
            let threads = worker_threads();
            let (servers_ref, tel, abort_ref) = (&servers, &telemetry, &abort);
            let (data, model, policy) = (&mut p.data, &mut p.model, &mut p.policy);
            let results: Vec<(WorkerKind, std::thread::Result<Result<()>>)> = std::thread::scope(|s| {
                let mut handles = Vec::new();
                handles.push((
                    WorkerKind::Data,
                    s.spawn(move || realtime_loop(&mut [data], servers_ref, tel, start, abort_ref)),
                ));
                if threads >= 3 {
                    handles.push((
                        WorkerKind::Model,
                        s.spawn(move || realtime_loop(&mut [model], servers_ref, tel, start, abort_ref)),
                    ));
                    handles.push((
                        WorkerKind::Policy,
                        s.spawn(move || realtime_loop(&mut [policy], servers_ref, tel, start, abort_ref)),
                    ));
                } else {
                    handles.push((
                        WorkerKind::Model,
                        s.spawn(move || realtime_loop(&mut [model, policy], servers_ref, tel, start, abort_ref)),
                    ));
                }
                handles.into_iter().map(|(k, h)| (k, h.join())).collect()
            });
            for (kind, r) in results {
                match r {
                    Ok(Ok(())) => {}
                    Ok(Err(e)) => {
                        return Err(Error::Worker {
                            worker: kind.name().into(),
                            message: e.to_string(),
                        })
                    }
                    Err(panic) => {
                        let message = panic
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "panicked".into());
                        return Err(Error::Worker {
                            worker: kind.name().into(),
                            message,
                        });
                    }
                }
            }
            let end = start.elapsed().as_secs_f64();
            Ok(finalize(telemetry, &servers, end))
        }
        other => Err(invalid(format!("run_async called with mode {other}"))),
    }
}

/// Worker threads allowed by `ASYNCDYNA_THREADS` (default 3, minimum 2: the
/// paced data worker always gets its own thread).
fn worker_threads() -> usize {
    std::env::var("ASYNCDYNA_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(3)
        .clamp(2, 3)
}

const REALTIME_IDLE: Duration = Duration::from_millis(1);

fn realtime_loop(workers: &mut [&mut dyn Worker], servers: &Servers, telemetry: &Telemetry, start: Instant, abort: &AtomicBool) -> Result<()> {
    let mut active = vec![true; workers.len()];
    let result = (|| {
        while active.iter().any(|&a| a) && !abort.load(Ordering::Acquire) {
            let mut progressed = false;
            for (w, live) in workers.iter_mut().zip(active.iter_mut()) {
                if !*live {
                    continue;
                }
                let ctx = Ctx {
                    servers,
                    telemetry,
                    clock: Clock::Real(start),
                };
                let t0 = Instant::now();
                match w.begin(&ctx)? {
                    Begin::Work(_) => {
                        w.finish(&ctx)?;
                        telemetry.busy(w.kind(), t0.elapsed().as_secs_f64());
                        progressed = true;
                    }
                    Begin::Idle => {}
                    Begin::Done => *live = false,
                }
            }
            if !progressed {
                std::thread::sleep(REALTIME_IDLE);
            }
        }
        Ok(())
    })();
    if result.is_err() {
        abort.store(true, Ordering::Release);
    }
    result
}

/// Single-threaded driver that advances a virtual clock by each operation's
/// duration.
struct Sequencer<'a> {
    servers: &'a Servers,
    telemetry: &'a Telemetry,
    now: f64,
}

impl Sequencer<'_> {
    /// Runs one operation; false when the worker was idle or done.
    fn op(&mut self, w: &mut dyn Worker) -> Result<bool> {
        let ctx = Ctx {
            servers: self.servers,
            telemetry: self.telemetry,
            clock: Clock::Virtual(self.now),
        };
        match w.begin(&ctx)? {
            Begin::Work(d) => {
                self.now += d;
                self.telemetry.busy(w.kind(), d);
                let ctx = Ctx {
                    clock: Clock::Virtual(self.now),
                    ..ctx
                };
                w.finish(&ctx)?;
                Ok(true)
            }
            Begin::Idle | Begin::Done => Ok(false),
        }
    }

    /// Up to `n` rollouts; false once the stop criterion prevents more.
    fn collect(&mut self, data: &mut DataWorker, n: usize) -> Result<bool> {
        for _ in 0..n {
            if !self.op(data)? {
                return Ok(false);
            }
        }
        Ok(!self.servers.stop_reached())
    }

    /// Up to `max` epochs, fewer if the model early-stops; returns epochs run.
    fn fit(&mut self, model: &mut ModelWorker, max: usize) -> Result<usize> {
        let mut epochs = 0;
        while epochs < max && self.op(model)? {
            epochs += 1;
        }
        Ok(epochs)
    }

    fn improve(&mut self, policy: &mut PolicyWorker, g: usize) -> Result<()> {
        for _ in 0..g {
            if !self.op(policy)? {
                break;
            }
        }
        Ok(())
    }
}

fn sequential(cfg: &RunConfig, body: impl FnOnce(&mut Sequencer, &mut Parts) -> Result<()>) -> Result<RunMetrics> {
    let pacing = Pacing::Virtual {
        speed_multiplier: cfg.speed_multiplier,
    };
    let (servers, p) = build(cfg, pacing)?;
    let mut p = Parts {
        data: p.data,
        model: p.model.ignoring_stop(),
        policy: p.policy.ignoring_stop(),
    };
    let telemetry = Telemetry::new();
    record_initial(&mut p.data, &servers, &telemetry, Clock::Virtual(0.0))?;
    let mut seq = Sequencer {
        servers: &servers,
        telemetry: &telemetry,
        now: 0.0,
    };
    body(&mut seq, &mut p)?;
    let end = seq.now;
    Ok(finalize(telemetry, &servers, end))
}

/// Collect `N` rollouts, fit the model until early stopping (at most
/// `max_epochs_per_iteration` epochs), take `G` policy steps; repeat.
pub fn run_sync(cfg: &RunConfig) -> Result<RunMetrics> {
    let (n, g, cap) = (cfg.ablation.n, cfg.ablation.g, cfg.model.max_epochs_per_iteration);
    sequential(cfg, |seq, p| {
        while seq.collect(&mut p.data, n)? {
            seq.fit(&mut p.model, cap)?;
            seq.improve(&mut p.policy, g)?;
        }
        Ok(())
    })
}

/// Collect `N` rollouts, then alternate `E` model epochs with `G` policy
/// steps until the model early-stops or hits the epoch cap.
pub fn run_partial_model_policy(cfg: &RunConfig) -> Result<RunMetrics> {
    let a = cfg.ablation;
    let cap = cfg.model.max_epochs_per_iteration;
    sequential(cfg, |seq, p| {
        while seq.collect(&mut p.data, a.n)? {
            let mut total = 0;
            loop {
                let ran = seq.fit(&mut p.model, a.e.min(cap - total))?;
                total += ran;
                if ran == 0 {
                    break;
                }
                seq.improve(&mut p.policy, a.g)?;
                if p.model.is_early_stopped() || total >= cap {
                    break;
                }
            }
        }
        Ok(())
    })
}

/// After an initial `N` rollouts, fit the model (early stopping, epoch cap),
/// then `N` times take `G` policy steps and collect one rollout.
pub fn run_partial_policy_data(cfg: &RunConfig) -> Result<RunMetrics> {
    let a = cfg.ablation;
    let cap = cfg.model.max_epochs_per_iteration;
    sequential(cfg, |seq, p| {
        if !seq.collect(&mut p.data, a.n)? {
            return Ok(());
        }
        'outer: loop {
            seq.fit(&mut p.model, cap)?;
            for _ in 0..a.n {
                seq.improve(&mut p.policy, a.g)?;
                if !seq.collect(&mut p.data, 1)? {
                    break 'outer;
                }
            }
        }
        Ok(())
    })
}

/// PPO on real trajectories: collect `N` rollouts, take `G` clipped steps on
/// that batch; repeat.
pub fn run_model_free(cfg: &RunConfig) -> Result<RunMetrics> {
    let (n, g) = (cfg.ablation.n, cfg.ablation.g.max(1));
    let env = env_for(cfg)?;
    let (mut policy, mut value_fn) = initial_nets(cfg, env.spec().obs_dim, env.spec().act_dim)?;
    let mut opt = PpoOptimizer::new(&policy, &value_fn, &cfg.train);
    let train = cfg.train.clone();
    let grad = cfg.cost.grad_step_duration;
    sequential(cfg, move |seq, p| {
        while seq.collect(&mut p.data, n)? {
            let trajectories = seq.servers.data.drain();
            let mut builder = BatchBuilder::new();
            for t in &trajectories {
                builder.begin_path();
                for tr in &t.transitions {
                    let lp = crate::nn::gaussian_log_density(&policy.mean(&tr.s)?, policy.log_std(), &tr.a)?;
                    builder.push(tr.s.clone(), tr.a.clone(), tr.r, tr.s_next.clone(), lp);
                }
                builder.end_path(t.transitions.last().map(|l| l.s_next.clone()), false);
            }
            let batch = builder.finish(&value_fn, train.gamma, train.gae_lambda)?;
            for _ in 0..g {
                let stats = ppo_update(&mut policy, &mut value_fn, &batch, &train, &mut opt)?;
                seq.now += grad;
                seq.telemetry.busy(WorkerKind::Policy, grad);
                if let Some(msg) = stats.skipped {
                    seq.telemetry.incident(format!("policy update skipped: {msg}"));
                    continue;
                }
                seq.telemetry.policy_step(0, 0);
                seq.telemetry.event(seq.now, WorkerKind::Policy, "grad_step", 0);
                let v = seq.servers.policy.push(ParamBlob::from_vectors(&policy.to_vectors()))?;
                seq.telemetry.event(seq.now, WorkerKind::Policy, "push_policy", v.0);
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workers::testing::{op_runs, tiny_config};

    const PHASES: [&str; 3] = ["push_trajectory", "epoch", "grad_step"];

    fn no_early_stop(mode: RunMode, max: u64) -> RunConfig {
        let mut cfg = tiny_config(mode, max);
        cfg.model.beta_ema = None;
        cfg
    }

    #[test]
    fn single_trajectory_run_stops_at_one() {
        let m = run(&tiny_config(RunMode::AsyncVirtual, 1)).unwrap();
        assert_eq!(m.summary.trajectories, 1);
        assert_eq!(m.rows.last().unwrap().trajectories, 1);
        assert_eq!(m.rows.first().unwrap().trajectories, 0);
    }

    #[test]
    fn every_mode_ends_at_the_stop_criterion() {
        for mode in [RunMode::AsyncVirtual, RunMode::Sync, RunMode::PartialModelPolicy, RunMode::PartialPolicyData, RunMode::ModelFree] {
            let m = run(&tiny_config(mode, 5)).unwrap();
            assert_eq!(m.summary.trajectories, 5, "{mode}");
            assert_eq!(m.summary.real_env_steps, 100, "{mode}");
            assert_eq!(m.rows.last().unwrap().trajectories, 5, "{mode}");
            assert_eq!(m.summary.wall_clock_s, m.summary.virtual_time_s);
            for w in m.rows.windows(2) {
                assert!(w[0].trajectories < w[1].trajectories && w[0].real_env_steps <= w[1].real_env_steps);
            }
        }
    }

    #[test]
    fn sync_trace_alternates_phases() {
        let m = run(&no_early_stop(RunMode::Sync, 4)).unwrap();
        let runs = op_runs(&m.events, &PHASES);
        assert_eq!(runs, vec![("push_trajectory", 2), ("epoch", 4), ("grad_step", 3), ("push_trajectory", 2)]);
    }

    #[test]
    fn partial_model_policy_trace_pattern() {
        let m = run(&no_early_stop(RunMode::PartialModelPolicy, 6)).unwrap();
        let runs = op_runs(&m.events, &PHASES);
        let round = [("push_trajectory", 2), ("epoch", 2), ("grad_step", 3), ("epoch", 2), ("grad_step", 3)];
        let want: Vec<_> = round.iter().chain(&round).copied().chain([("push_trajectory", 2)]).collect();
        assert_eq!(runs, want);
    }

    #[test]
    fn partial_policy_data_trace_pattern() {
        let m = run(&no_early_stop(RunMode::PartialPolicyData, 6)).unwrap();
        let runs = op_runs(&m.events, &PHASES);
        let round = [("epoch", 4), ("grad_step", 3), ("push_trajectory", 1), ("grad_step", 3), ("push_trajectory", 1)];
        let want: Vec<_> = [("push_trajectory", 2)].iter().chain(&round).chain(&round).copied().collect();
        assert_eq!(runs, want);
    }

    #[test]
    fn model_free_trains_on_real_batches() {
        let m = run(&tiny_config(RunMode::ModelFree, 4)).unwrap();
        let runs = op_runs(&m.events, &["push_trajectory", "grad_step"]);
        assert_eq!(runs, vec![("push_trajectory", 2), ("grad_step", 3), ("push_trajectory", 2)]);
        assert_eq!(m.summary.imagined_steps, 0);
        assert_eq!(m.summary.model_epochs, 0);
        // The second pair of rollouts used the third pushed policy.
        assert_eq!(m.summary.rollout_policy_versions, vec![0, 0, 3, 3]);
    }

    #[test]
    fn async_virtual_is_deterministic() {
        let cfg = tiny_config(RunMode::AsyncVirtual, 6);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.trace_text(), b.trace_text());
        assert_eq!(format!("{:?}", a.rows), format!("{:?}", b.rows));
        let other = run(&RunConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(format!("{:?}", a.rows), format!("{:?}", other.rows));
    }

    #[test]
    fn published_versions_are_monotone() {
        let m = run(&tiny_config(RunMode::AsyncVirtual, 6)).unwrap();
        for op in ["push_model", "push_policy"] {
            let versions: Vec<u64> = m.events.iter().filter(|e| e.op == op).map(|e| e.version).collect();
            assert!(!versions.is_empty(), "{op}");
            assert_eq!(versions, (1..=versions.len() as u64).collect::<Vec<_>>(), "{op}");
        }
        let s = &m.summary;
        assert!(s.rollout_policy_versions.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.step_model_versions.windows(2).all(|w| w[0] <= w[1]));
        assert!(m.events.windows(2).all(|w| w[0].time <= w[1].time));
        assert_eq!(s.model_pushes, s.model_epochs);
    }

    #[test]
    fn evaluation_does_not_touch_training() {
        let cfg = tiny_config(RunMode::AsyncVirtual, 4);
        let a = run(&cfg).unwrap();
        let b = run(&RunConfig { eval_episodes: 5, ..cfg }).unwrap();
        assert_eq!(a.summary.real_env_steps, b.summary.real_env_steps);
        assert_eq!(a.trace_text(), b.trace_text());
    }

    #[test]
    fn modes_share_rollout_seeds() {
        let a = run(&tiny_config(RunMode::AsyncVirtual, 4)).unwrap();
        let s = run(&tiny_config(RunMode::Sync, 4)).unwrap();
        assert_eq!(a.summary.rollout_env_seeds, s.summary.rollout_env_seeds);
        assert_eq!(a.summary.rollout_env_seeds[1], DataWorker::env_seed(0, 1));
    }

    #[test]
    fn realtime_run_completes() {
        let mut cfg = tiny_config(RunMode::AsyncRealtime, 3);
        cfg.speed_multiplier = 50.0;
        let m = run(&cfg).unwrap();
        assert_eq!(m.summary.trajectories, 3);
        assert!(m.summary.wall_clock_s > 0.0);
    }

    #[test]
    fn nothing_trains_before_the_first_trajectory() {
        // 400 steps at dt 0.05: each rollout takes 20 virtual seconds.
        let mut cfg = tiny_config(RunMode::AsyncVirtual, 2);
        cfg.dt = Some(0.05);
        cfg.horizon = 400;
        cfg.cost.epoch_duration = 1.0;
        cfg.cost.grad_step_duration = 0.1;
        let m = run(&cfg).unwrap();
        let early: Vec<&str> = m.events.iter().filter(|e| e.time < 20.0).map(|e| e.op).collect();
        assert_eq!(early, vec!["pull_policy"]);
        let first_push = m.events.iter().find(|e| e.op == "push_trajectory").unwrap();
        assert_eq!(first_push.time, 20.0);
        let first_epoch = m.events.iter().find(|e| e.op == "epoch").unwrap();
        assert!(first_epoch.time >= 20.0);
    }

    #[test]
    fn sync_steps_use_the_latest_fit() {
        let m = run(&tiny_config(RunMode::Sync, 6)).unwrap();
        let mut latest = 0;
        let mut steps = 0;
        for e in &m.events {
            match e.op {
                "push_model" => latest = e.version,
                "grad_step" => {
                    assert_eq!(e.version, latest);
                    steps += 1;
                }
                _ => {}
            }
        }
        assert!(steps > 0);
    }

    #[test]
    fn run_async_rejects_sequential_modes() {
        assert!(run_async(&tiny_config(RunMode::Sync, 1)).is_err());
    }
}
