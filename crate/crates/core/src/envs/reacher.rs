use super::{lorentzian_reward, seeded_rng, uniform, wrap_angle, Env, EnvSpec, RewardFn, RewardParams};

pub(super) const DEFAULT_DT: f64 = 0.05;

const LINK1: f64 = 0.5;
const LINK2: f64 = 0.5;
const MASS1: f64 = 1.0;
const MASS2: f64 = 1.0;
const DAMPING: f64 = 0.1;
const MAX_TORQUE: f64 = 1.0;
const MAX_SPEED: f64 = 10.0;
pub const REACHER_TARGET: [f64; 2] = [0.5, 0.5];

/// Planar two-link arm in a horizontal plane (no gravity) reaching a fixed
/// target.
///
/// Point masses sit at the link ends. Joint accelerations solve
/// `M(q)·q̈ = τ − C(q, q̇) − b·q̇` with the standard two-link mass matrix and
/// Coriolis terms; integration is semi-implicit Euler with joint speeds
/// clipped to ±10 rad/s and angles wrapped to `(−π, π]`.
///
/// Observation: `(q1, q2, q̇1, q̇2, x_tip, y_tip)`. Initial state:
/// `q1 ~ U(−π, π)`, `q2 ~ U(−π/2, π/2)`, `q̇ ~ U(−0.1, 0.1)²`.
/// Reward on the next state: `lorentzian(d) − c·‖τ‖² − k·‖q̇‖²`, `d` the
/// fingertip-to-target distance.
#[derive(Debug, Clone)]
pub struct Reacher {
    spec: EnvSpec,
    reward: RewardParams,
}

impl Default for Reacher {
    fn default() -> Self {
        Self::with_settings(DEFAULT_DT, super::DEFAULT_HORIZON)
    }
}

impl Reacher {
    pub fn with_settings(dt: f64, horizon: usize) -> Self {
        Reacher {
            spec: EnvSpec {
                obs_dim: 6,
                act_dim: 2,
                horizon,
                dt,
                action_low: vec![-MAX_TORQUE; 2],
                action_high: vec![MAX_TORQUE; 2],
            },
            reward: RewardParams::default(),
        }
    }

    pub fn with_reward(mut self, reward: RewardParams) -> Self {
        self.reward = reward;
        self
    }

    pub fn reward_params(&self) -> &RewardParams {
        &self.reward
    }

    pub fn fingertip(q1: f64, q2: f64) -> [f64; 2] {
        [
            LINK1 * q1.cos() + LINK2 * (q1 + q2).cos(),
            LINK1 * q1.sin() + LINK2 * (q1 + q2).sin(),
        ]
    }

    pub fn observe(q: [f64; 2], qd: [f64; 2]) -> Vec<f64> {
        let tip = Self::fingertip(q[0], q[1]);
        vec![q[0], q[1], qd[0], qd[1], tip[0], tip[1]]
    }

    pub fn target_distance(obs: &[f64]) -> f64 {
        let dx = obs[4] - REACHER_TARGET[0];
        let dy = obs[5] - REACHER_TARGET[1];
        (dx * dx + dy * dy).sqrt()
    }

    fn accelerations(q2: f64, qd: [f64; 2], tau: [f64; 2]) -> [f64; 2] {
        let (c2, s2) = (q2.cos(), q2.sin());
        let h = MASS2 * LINK1 * LINK2;
        let m11 = (MASS1 + MASS2) * LINK1 * LINK1 + MASS2 * LINK2 * LINK2 + 2.0 * h * c2;
        let m12 = MASS2 * LINK2 * LINK2 + h * c2;
        let m22 = MASS2 * LINK2 * LINK2;
        let c1 = -h * s2 * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]);
        let c2_term = h * s2 * qd[0] * qd[0];
        let rhs1 = tau[0] - c1 - DAMPING * qd[0];
        let rhs2 = tau[1] - c2_term - DAMPING * qd[1];
        let det = m11 * m22 - m12 * m12;
        [(m22 * rhs1 - m12 * rhs2) / det, (m11 * rhs2 - m12 * rhs1) / det]
    }
}

impl RewardFn for Reacher {
    fn reward(&self, _obs: &[f64], action: &[f64], next_obs: &[f64]) -> f64 {
        let d = Self::target_distance(next_obs);
        let torque2: f64 = action.iter().map(|a| a * a).sum();
        let vel2 = next_obs[2] * next_obs[2] + next_obs[3] * next_obs[3];
        lorentzian_reward(d, &self.reward) - self.reward.ctrl_penalty * torque2 - self.reward.vel_penalty * vel2
    }
}

impl Env for Reacher {
    fn name(&self) -> &'static str {
        "reacher"
    }

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        use std::f64::consts::{FRAC_PI_2, PI};
        let mut rng = seeded_rng(seed);
        let q1 = uniform(&mut rng, -PI, PI);
        let q2 = uniform(&mut rng, -FRAC_PI_2, FRAC_PI_2);
        let qd1 = uniform(&mut rng, -0.1, 0.1);
        let qd2 = uniform(&mut rng, -0.1, 0.1);
        Self::observe([q1, q2], [qd1, qd2])
    }

    fn dynamics(&self, obs: &[f64], action: &[f64]) -> Vec<f64> {
        let dt = self.spec.dt;
        let acc = Self::accelerations(obs[1], [obs[2], obs[3]], [action[0], action[1]]);
        let qd = [
            (obs[2] + acc[0] * dt).clamp(-MAX_SPEED, MAX_SPEED),
            (obs[3] + acc[1] * dt).clamp(-MAX_SPEED, MAX_SPEED),
        ];
        let q = [wrap_angle(obs[0] + qd[0] * dt), wrap_angle(obs[1] + qd[1] * dt)];
        Self::observe(q, qd)
    }

    /// Jacobian-transpose PD control of the fingertip toward the target.
    fn reference_action(&self, obs: &[f64]) -> Vec<f64> {
        let (q1, q2) = (obs[0], obs[1]);
        let ex = REACHER_TARGET[0] - obs[4];
        let ey = REACHER_TARGET[1] - obs[5];
        let (s1, c1) = q1.sin_cos();
        let (s12, c12) = (q1 + q2).sin_cos();
        // fingertip Jacobian columns
        let j = [[-LINK1 * s1 - LINK2 * s12, -LINK2 * s12], [LINK1 * c1 + LINK2 * c12, LINK2 * c12]];
        let kp = 8.0;
        let fx = kp * ex;
        let fy = kp * ey;
        let tau = [
            j[0][0] * fx + j[1][0] * fy - 1.0 * obs[2],
            j[0][1] * fx + j[1][1] * fy - 1.0 * obs[3],
        ];
        tau.iter().map(|t| t.clamp(-MAX_TORQUE, MAX_TORQUE)).collect()
    }
}
