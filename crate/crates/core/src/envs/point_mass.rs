use super::{seeded_rng, uniform, Env, EnvSpec, RewardFn};

pub(super) const DEFAULT_DT: f64 = 0.05;

const MAX_ACCEL: f64 = 1.0;

/// Planar double integrator driven toward the origin.
///
/// Exact zero-order-hold update: `p' = p + v·dt + ½·a·dt²`, `v' = v + a·dt`.
/// Observation `(x, y, vx, vy)`, action `(ax, ay) ∈ [−1, 1]²`. Reward on the
/// next state: `−(‖p'‖² + 0.1·‖v'‖² + 0.01·‖a‖²)`. Initial state:
/// `p ~ U(−1, 1)²`, `v = 0`.
#[derive(Debug, Clone)]
pub struct PointMass {
    spec: EnvSpec,
}

impl Default for PointMass {
    fn default() -> Self {
        Self::with_settings(DEFAULT_DT, super::DEFAULT_HORIZON)
    }
}

impl PointMass {
    pub fn with_settings(dt: f64, horizon: usize) -> Self {
        PointMass {
            spec: EnvSpec {
                obs_dim: 4,
                act_dim: 2,
                horizon,
                dt,
                action_low: vec![-MAX_ACCEL; 2],
                action_high: vec![MAX_ACCEL; 2],
            },
        }
    }
}

impl RewardFn for PointMass {
    fn reward(&self, _obs: &[f64], action: &[f64], next_obs: &[f64]) -> f64 {
        let p2 = next_obs[0] * next_obs[0] + next_obs[1] * next_obs[1];
        let v2 = next_obs[2] * next_obs[2] + next_obs[3] * next_obs[3];
        let a2 = action[0] * action[0] + action[1] * action[1];
        -(p2 + 0.1 * v2 + 0.01 * a2)
    }
}

impl Env for PointMass {
    fn name(&self) -> &'static str {
        "point_mass"
    }

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        let x = uniform(&mut rng, -1.0, 1.0);
        let y = uniform(&mut rng, -1.0, 1.0);
        vec![x, y, 0.0, 0.0]
    }

    fn dynamics(&self, obs: &[f64], action: &[f64]) -> Vec<f64> {
        let dt = self.spec.dt;
        let mut next = Vec::with_capacity(4);
        for i in 0..2 {
            next.push(obs[i] + obs[i + 2] * dt + 0.5 * action[i] * dt * dt);
        }
        for i in 0..2 {
            next.push(obs[i + 2] + action[i] * dt);
        }
        next
    }

    /// Critically damped PD toward the origin.
    fn reference_action(&self, obs: &[f64]) -> Vec<f64> {
        (0..2)
            .map(|i| (-4.0 * obs[i] - 4.0 * obs[i + 2]).clamp(-MAX_ACCEL, MAX_ACCEL))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::env_step;

    #[test]
    fn unit_push_from_origin() {
        let env = PointMass::default();
        let st = env_step(&env, &[0.0; 4], &[1.0, 0.0], 0).unwrap();
        let dt = 0.05;
        assert_eq!(st.obs, vec![0.5 * dt * dt, 0.0, dt, 0.0]);
    }

    #[test]
    fn closed_form_after_many_steps() {
        // constant acceleration: p(T) = ½aT², v(T) = aT, exact under ZOH
        let env = PointMass::with_settings(0.01, 200);
        let mut obs = vec![0.0; 4];
        for t in 0..100 {
            obs = env_step(&env, &obs, &[0.5, -1.0], t).unwrap().obs;
        }
        let time = 1.0;
        assert!((obs[0] - 0.25 * time * time).abs() < 1e-12);
        assert!((obs[1] + 0.5 * time * time).abs() < 1e-12);
        assert!((obs[2] - 0.5).abs() < 1e-12);
        assert!((obs[3] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn reset_ranges() {
        let env = PointMass::default();
        for seed in 0..100 {
            let o = env.reset(seed);
            assert!(o[0].abs() < 1.0 && o[1].abs() < 1.0);
            assert_eq!(&o[2..], &[0.0, 0.0]);
        }
    }
}
