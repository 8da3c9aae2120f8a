//! Continuous-control environments with exactly specified dynamics, trajectory
//! types and their wire format, and paced rollout collection.
//!
//! Environments are stateless: the observation fully determines the physical
//! state, so `step` is a pure function of `(obs, action)`.

mod pendulum;
mod point_mass;
mod reacher;
mod reward;
mod rollout;

pub use pendulum::Pendulum;
pub use point_mass::PointMass;
pub use reacher::Reacher;
pub use reward::{lorentzian_reward, RewardParams};
pub use rollout::{collect_rollout, Pacing, Rollout};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_len, invalid, Error, Result};
use crate::nn::{read_f64, read_u32, read_u64};

pub const DEFAULT_HORIZON: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub horizon: usize,
    /// Seconds of real time per control step.
    pub dt: f64,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.act_dim == 0 {
            return Err(invalid("env dimensions must be positive"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        ensure_len("action_low", self.action_low.len(), self.act_dim)?;
        ensure_len("action_high", self.action_high.len(), self.act_dim)?;
        if self.action_low.iter().zip(&self.action_high).any(|(l, h)| !(l < h)) {
            return Err(invalid("action bounds need low < high"));
        }
        Ok(())
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }

    /// Seconds needed to collect a full-horizon trajectory at the given speed.
    pub fn rollout_duration(&self, speed_multiplier: f64) -> f64 {
        self.horizon as f64 * self.dt / speed_multiplier
    }
}

/// Known reward function of a task, usable on model-predicted states.
pub trait RewardFn: Send + Sync {
    /// `action` is the applied (already clipped) action.
    fn reward(&self, obs: &[f64], action: &[f64], next_obs: &[f64]) -> f64;
}

pub trait Env: RewardFn {
    fn name(&self) -> &'static str;

    fn spec(&self) -> &EnvSpec;

    /// Draw from the initial-state distribution; deterministic per seed.
    fn reset(&self, seed: u64) -> Vec<f64>;

    /// Physics for one control period with an in-bounds action.
    fn dynamics(&self, obs: &[f64], action: &[f64]) -> Vec<f64>;

    /// Scripted reference controller used to calibrate "solved" thresholds.
    fn reference_action(&self, obs: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Action after clipping to the bounds.
    pub applied_action: Vec<f64>,
    pub done: bool,
}

/// One environment step at index `t`. Out-of-bounds actions are clipped;
/// `done` is set only when `t + 1` reaches the horizon.
pub fn env_step(env: &dyn Env, obs: &[f64], action: &[f64], t: usize) -> Result<StepResult> {
    let spec = env.spec();
    ensure_len("observation", obs.len(), spec.obs_dim)?;
    ensure_len("action", action.len(), spec.act_dim)?;
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numeric(format!("non-finite action {action:?}")));
    }
    let applied = spec.clip_action(action);
    let next = env.dynamics(obs, &applied);
    let reward = env.reward(obs, &applied, &next);
    Ok(StepResult {
        obs: next,
        reward,
        applied_action: applied,
        done: t + 1 >= spec.horizon,
    })
}

pub fn env_reset(env: &dyn Env, seed: u64) -> Vec<f64> {
    env.reset(seed)
}

/// Builds a named environment. `dt` overrides the default control period.
pub fn make_env(name: &str, dt: Option<f64>, horizon: usize) -> Result<Box<dyn Env>> {
    let env: Box<dyn Env> = match name {
        "pendulum" => Box::new(Pendulum::with_settings(dt.unwrap_or(pendulum::DEFAULT_DT), horizon)),
        "reacher" => Box::new(Reacher::with_settings(dt.unwrap_or(reacher::DEFAULT_DT), horizon)),
        "point_mass" => Box::new(PointMass::with_settings(dt.unwrap_or(point_mass::DEFAULT_DT), horizon)),
        other => {
            return Err(invalid(format!(
                "unknown env `{other}` (allowed: {})",
                ENV_NAMES.join(", ")
            )))
        }
    };
    env.spec().validate()?;
    Ok(env)
}

pub const ENV_NAMES: &[&str] = &["pendulum", "reacher", "point_mass"];

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut a = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub s_next: Vec<f64>,
    pub r: f64,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub return_undiscounted: f64,
    pub env_seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.transitions.iter().map(|t| t.r)
    }

    /// Checks dimensions, step indices and state chaining.
    pub fn validate(&self, obs_dim: usize, act_dim: usize, horizon: usize) -> Result<()> {
        if self.transitions.len() > horizon {
            return Err(invalid(format!(
                "trajectory of length {} exceeds horizon {horizon}",
                self.transitions.len()
            )));
        }
        for (k, tr) in self.transitions.iter().enumerate() {
            ensure_len("transition s", tr.s.len(), obs_dim)?;
            ensure_len("transition a", tr.a.len(), act_dim)?;
            ensure_len("transition s_next", tr.s_next.len(), obs_dim)?;
            if tr.t != k {
                return Err(invalid(format!("transition {k} carries step index {}", tr.t)));
            }
            if k > 0 && self.transitions[k - 1].s_next != tr.s {
                return Err(invalid(format!("transition {k} does not chain from its predecessor")));
            }
        }
        Ok(())
    }

    /// Wire format (all little-endian): `u32 n`, `u32 obs_dim`, `u32 act_dim`,
    /// `u64 env_seed`, `f64 return`, then per transition
    /// `s[obs_dim] a[act_dim] s_next[obs_dim] r` as `f64` and `t` as `u64`.
    pub fn write_to(&self, out: &mut Vec<u8>) {
        let (obs_dim, act_dim) = self
            .transitions
            .first()
            .map(|t| (t.s.len(), t.a.len()))
            .unwrap_or((0, 0));
        out.extend_from_slice(&(self.transitions.len() as u32).to_le_bytes());
        out.extend_from_slice(&(obs_dim as u32).to_le_bytes());
        out.extend_from_slice(&(act_dim as u32).to_le_bytes());
        out.extend_from_slice(&self.env_seed.to_le_bytes());
        out.extend_from_slice(&self.return_undiscounted.to_le_bytes());
        for tr in &self.transitions {
            for v in tr.s.iter().chain(&tr.a).chain(&tr.s_next) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&tr.r.to_le_bytes());
            out.extend_from_slice(&(tr.t as u64).to_le_bytes());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out);
        out
    }

    pub fn read_from(buf: &mut &[u8]) -> Result<Self> {
        let n = read_u32(buf)? as usize;
        let obs_dim = read_u32(buf)? as usize;
        let act_dim = read_u32(buf)? as usize;
        let env_seed = read_u64(buf)?;
        let return_undiscounted = read_f64(buf)?;
        let record = 8 * (2 * obs_dim + act_dim + 2);
        if buf.len() < n.saturating_mul(record) {
            return Err(invalid("trajectory payload truncated"));
        }
        let read_vec = |buf: &mut &[u8], d: usize| -> Result<Vec<f64>> { (0..d).map(|_| read_f64(buf)).collect() };
        let mut transitions = Vec::with_capacity(n);
        for _ in 0..n {
            let s = read_vec(buf, obs_dim)?;
            let a = read_vec(buf, act_dim)?;
            let s_next = read_vec(buf, obs_dim)?;
            let r = read_f64(buf)?;
            let t = read_u64(buf)? as usize;
            transitions.push(Transition { s, a, s_next, r, t });
        }
        Ok(Trajectory {
            transitions,
            return_undiscounted,
            env_seed,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut buf = bytes;
        let t = Self::read_from(&mut buf)?;
        if !buf.is_empty() {
            return Err(invalid("trailing bytes after trajectory"));
        }
        Ok(t)
    }
}
