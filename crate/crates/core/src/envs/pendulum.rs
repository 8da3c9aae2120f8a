use super::{seeded_rng, uniform, wrap_angle, Env, EnvSpec, RewardFn};

pub(super) const DEFAULT_DT: f64 = 0.05;

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const MAX_TORQUE: f64 = 2.0;
const MAX_SPEED: f64 = 8.0;

/// Torque-limited pendulum swing-up.
///
/// State `θ` is measured from upright, observation is `(cos θ, sin θ, θ̇)`.
/// Dynamics are a uniform rod about its end, integrated with semi-implicit
/// Euler: `θ̇' = clip(θ̇ + (3g/2ℓ·sin θ + 3u/(mℓ²))·dt, ±8)`, `θ' = θ + θ̇'·dt`.
/// Reward on the pre-step state: `−(θ² + 0.1·θ̇² + 0.001·u²)` with `θ`
/// wrapped to `(−π, π]`. Initial state: `θ ~ U(−π, π)`, `θ̇ ~ U(−1, 1)`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::with_settings(DEFAULT_DT, super::DEFAULT_HORIZON)
    }
}

impl Pendulum {
    pub fn with_settings(dt: f64, horizon: usize) -> Self {
        Pendulum {
            spec: EnvSpec {
                obs_dim: 3,
                act_dim: 1,
                horizon,
                dt,
                action_low: vec![-MAX_TORQUE],
                action_high: vec![MAX_TORQUE],
            },
        }
    }

    pub fn observe(theta: f64, theta_dot: f64) -> Vec<f64> {
        vec![theta.cos(), theta.sin(), theta_dot]
    }

    /// `(θ, θ̇)` recovered from an observation, `θ ∈ (−π, π]`.
    pub fn state(obs: &[f64]) -> (f64, f64) {
        (wrap_angle(obs[1].atan2(obs[0])), obs[2])
    }

    /// Mechanical energy, zero torque and no damping conserve it exactly in
    /// continuous time. The upright rest state has energy `mgℓ/2`.
    pub fn energy(obs: &[f64]) -> f64 {
        let (theta, theta_dot) = Self::state(obs);
        let inertia = MASS * LENGTH * LENGTH / 3.0;
        0.5 * inertia * theta_dot * theta_dot + MASS * GRAVITY * LENGTH / 2.0 * theta.cos()
    }
}

impl RewardFn for Pendulum {
    fn reward(&self, obs: &[f64], action: &[f64], _next_obs: &[f64]) -> f64 {
        let (theta, theta_dot) = Self::state(obs);
        let u = action[0];
        -(theta * theta + 0.1 * theta_dot * theta_dot + 0.001 * u * u)
    }
}

impl Env for Pendulum {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        use std::f64::consts::PI;
        let mut rng = seeded_rng(seed);
        let theta = uniform(&mut rng, -PI, PI);
        let theta_dot = uniform(&mut rng, -1.0, 1.0);
        Self::observe(theta, theta_dot)
    }

    fn dynamics(&self, obs: &[f64], action: &[f64]) -> Vec<f64> {
        let (theta, theta_dot) = Self::state(obs);
        let u = action[0];
        let dt = self.spec.dt;
        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        let new_dot = (theta_dot + accel * dt).clamp(-MAX_SPEED, MAX_SPEED);
        let new_theta = wrap_angle(theta + new_dot * dt);
        Self::observe(new_theta, new_dot)
    }

    /// Energy pumping toward the upright energy level, with a saturated PD
    /// catch near the top.
    fn reference_action(&self, obs: &[f64]) -> Vec<f64> {
        let (theta, theta_dot) = Self::state(obs);
        let u = if theta.cos() > 0.85 {
            -(10.0 * theta + 2.0 * theta_dot)
        } else {
            let target = MASS * GRAVITY * LENGTH / 2.0;
            let deficit = target - Self::energy(obs);
            let dir = if theta_dot.abs() < 1e-3 { 1.0 } else { theta_dot.signum() };
            10.0 * deficit * dir
        };
        vec![u.clamp(-MAX_TORQUE, MAX_TORQUE)]
    }
}
