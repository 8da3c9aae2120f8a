use std::time::{Duration, Instant};

use super::{env_step, Env, Trajectory, Transition};
use crate::error::{ensure_len, invalid, Error, Result};

/// How collection time relates to real time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// Simulate as fast as possible.
    Unpaced,
    /// Every step consumes `dt / speed_multiplier` seconds of wall-clock time.
    RealTime { speed_multiplier: f64 },
    /// No sleeping; the rollout only reports its virtual duration.
    Virtual { speed_multiplier: f64 },
}

impl Pacing {
    pub fn speed_multiplier(&self) -> f64 {
        match *self {
            Pacing::Unpaced => 1.0,
            Pacing::RealTime { speed_multiplier } | Pacing::Virtual { speed_multiplier } => speed_multiplier,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectory: Trajectory,
    /// `steps · dt / speed_multiplier`
    pub virtual_duration: f64,
    pub elapsed: Duration,
}

/// Runs one episode from `env.reset(env_seed)` until the horizon.
///
/// The policy receives the current observation and returns a raw action; the
/// environment clips it and the trajectory records the applied action.
pub fn collect_rollout(
    env: &dyn Env,
    policy: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    pacing: Pacing,
    env_seed: u64,
) -> Result<Rollout> {
    let speed = pacing.speed_multiplier();
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(invalid(format!("speed multiplier must be positive, got {speed}")));
    }
    let spec = env.spec();
    let step_period = Duration::from_secs_f64(spec.dt / speed);
    let start = Instant::now();

    let mut obs = env.reset(env_seed);
    let mut transitions = Vec::with_capacity(spec.horizon);
    let mut ret = 0.0;
    for t in 0..spec.horizon {
        let action = policy(&obs)?;
        ensure_len("policy action", action.len(), spec.act_dim)?;
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numeric(format!("policy produced non-finite action at step {t}")));
        }
        let step = env_step(env, &obs, &action, t)?;
        ret += step.reward;
        let next = step.obs;
        transitions.push(Transition {
            s: std::mem::replace(&mut obs, next.clone()),
            a: step.applied_action,
            s_next: next,
            r: step.reward,
            t,
        });
        if let Pacing::RealTime { .. } = pacing {
            let deadline = start + step_period * (t as u32 + 1);
            let now = Instant::now();
            if deadline > now {
                std::thread::sleep(deadline - now);
            }
        }
        if step.done {
            break;
        }
    }
    let steps = transitions.len();
    Ok(Rollout {
        trajectory: Trajectory {
            transitions,
            return_undiscounted: ret,
            env_seed,
        },
        virtual_duration: steps as f64 * spec.dt / speed,
        elapsed: start.elapsed(),
    })
}
