use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{GaussianPolicy, TrainConfig, ValueFunction};
use crate::dynamics::DynamicsModel;
use crate::envs::{EnvSpec, RewardFn};
use crate::error::{ensure_len, invalid, Error, Result};
use crate::nn::rows_to_array;
use crate::SimRng;

/// Aligned on-policy samples with GAE advantages, one row per transition.
#[derive(Debug, Clone, PartialEq)]
pub struct ImaginedBatch {
    pub states: Array2<f64>,
    /// Sampled (unclipped) actions, the ones `old_log_probs` refer to.
    pub actions: Array2<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Array2<f64>,
    pub old_log_probs: Vec<f64>,
    /// Standardized to zero mean and unit (population) std when the batch
    /// has any spread; only centered otherwise.
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    pub paths: usize,
    /// Paths cut short by a non-finite model prediction.
    pub truncated_paths: usize,
}

impl ImaginedBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// `δ_t = r_t + γV_{t+1} − V_t`, `A_t = Σ_k (γλ)^k δ_{t+k}`, targets `A + V`.
/// `values` holds `V_0..V_{T−1}`; `bootstrap_value` is `V_T`.
pub fn compute_gae(rewards: &[f64], values: &[f64], bootstrap_value: f64, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len("gae values", values.len(), rewards.len())?;
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let delta = rewards[t] + gamma * next_v - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}

struct PathRecord {
    start: usize,
    len: usize,
    bootstrap: Option<Vec<f64>>,
}

/// Accumulates paths and turns them into an [`ImaginedBatch`].
#[derive(Default)]
pub struct BatchBuilder {
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    next_states: Vec<Vec<f64>>,
    log_probs: Vec<f64>,
    paths: Vec<PathRecord>,
    truncated: usize,
}

impl BatchBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn begin_path(&mut self) {
        self.paths.push(PathRecord {
            start: self.rewards.len(),
            len: 0,
            bootstrap: None,
        });
    }

    /// Appends one transition to the most recently begun path.
    pub fn push(&mut self, s: Vec<f64>, a: Vec<f64>, r: f64, s_next: Vec<f64>, log_prob: f64) {
        if self.paths.is_empty() {
            self.begin_path();
        }
        self.states.push(s);
        self.actions.push(a);
        self.rewards.push(r);
        self.next_states.push(s_next);
        self.log_probs.push(log_prob);
        self.paths.last_mut().expect("path").len += 1;
    }

    /// Ends the current path; `bootstrap` is the state whose value closes the
    /// return, `None` for a true terminal.
    pub fn end_path(&mut self, bootstrap: Option<Vec<f64>>, truncated: bool) {
        if let Some(p) = self.paths.last_mut() {
            p.bootstrap = bootstrap;
        }
        if truncated {
            self.truncated += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn finish(self, value_fn: &ValueFunction, gamma: f64, lambda: f64) -> Result<ImaginedBatch> {
        if self.rewards.is_empty() {
            return Err(Error::Precondition("batch has no transitions".into()));
        }
        let obs_dim = self.states[0].len();
        let act_dim = self.actions[0].len();
        let states = rows_to_array(&self.states, obs_dim)?;
        let values = value_fn.values(states.view())?;
        let boot_rows: Vec<Vec<f64>> = self.paths.iter().filter_map(|p| p.bootstrap.clone()).collect();
        let boot_values = if boot_rows.is_empty() {
            Vec::new()
        } else {
            value_fn.values(rows_to_array(&boot_rows, obs_dim)?.view())?
        };
        let mut boot_iter = boot_values.into_iter();
        let mut advantages = Vec::with_capacity(self.rewards.len());
        let mut targets = Vec::with_capacity(self.rewards.len());
        for p in self.paths.iter().filter(|p| p.len > 0 || p.bootstrap.is_some()) {
            let boot = if p.bootstrap.is_some() { boot_iter.next().expect("bootstrap value") } else { 0.0 };
            let range = p.start..p.start + p.len;
            let (a, t) = compute_gae(&self.rewards[range.clone()], &values[range], boot, gamma, lambda)?;
            advantages.extend(a);
            targets.extend(t);
        }
        standardize(&mut advantages);
        Ok(ImaginedBatch {
            states,
            actions: rows_to_array(&self.actions, act_dim)?,
            rewards: self.rewards,
            next_states: rows_to_array(&self.next_states, obs_dim)?,
            old_log_probs: self.log_probs,
            advantages,
            value_targets: targets,
            paths: self.paths.iter().filter(|p| p.len > 0).count(),
            truncated_paths: self.truncated,
        })
    }
}

fn standardize(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
    for v in x.iter_mut() {
        *v = (*v - mean) * scale;
    }
    // second pass removes the residual mean left by rounding
    let resid = x.iter().sum::<f64>() / n;
    for v in x.iter_mut() {
        *v -= resid;
    }
}

/// Rolls the policy through `model` from every initial state for `horizon`
/// steps. Rewards come from `reward` on the clipped action and predicted next
/// state. A path whose prediction turns non-finite ends before that step.
#[allow(clippy::too_many_arguments)]
pub fn imagine_rollouts(
    policy: &GaussianPolicy,
    value_fn: &ValueFunction,
    model: &dyn DynamicsModel,
    reward: &dyn RewardFn,
    env_spec: &EnvSpec,
    init_states: &[Vec<f64>],
    horizon: usize,
    cfg: &TrainConfig,
    rng: &mut SimRng,
) -> Result<ImaginedBatch> {
    if init_states.is_empty() {
        return Err(invalid("imagine_rollouts needs at least one initial state"));
    }
    if horizon == 0 {
        return Err(invalid("imagined horizon must be at least 1"));
    }
    let obs_dim = policy.obs_dim();
    let act_dim = policy.act_dim();
    ensure_len("model obs_dim", model.obs_dim(), obs_dim)?;
    ensure_len("model act_dim", model.act_dim(), act_dim)?;
    let n = init_states.len();
    let mut current = rows_to_array(init_states, obs_dim)?;
    let mut alive = vec![true; n];
    let mut paths: Vec<Vec<(Vec<f64>, Vec<f64>, f64, Vec<f64>, f64)>> = vec![Vec::with_capacity(horizon); n];
    let mut truncated = vec![false; n];
    let std: Vec<f64> = policy.log_std().iter().map(|l| l.exp()).collect();
    for _ in 0..horizon {
        let means = policy.mean_batch(current.view())?;
        let mut actions = means.clone();
        for mut row in actions.rows_mut() {
            for (v, s) in row.iter_mut().zip(&std) {
                *v += s * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let log_probs = policy.log_probs(means.view(), actions.view());
        let mut applied = actions.clone();
        for mut row in applied.rows_mut() {
            let clipped = env_spec.clip_action(&row.to_vec());
            row.assign(&ArrayView1::from(&clipped));
        }
        let next = model.predict_batch(current.view(), applied.view(), rng)?;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            let s = current.row(i).to_vec();
            let s_next = next.row(i).to_vec();
            if s_next.iter().any(|v| !v.is_finite()) {
                alive[i] = false;
                truncated[i] = true;
                continue;
            }
            let a_applied = applied.row(i).to_vec();
            let r = reward.reward(&s, &a_applied, &s_next);
            if !r.is_finite() {
                alive[i] = false;
                truncated[i] = true;
                continue;
            }
            paths[i].push((s, actions.row(i).to_vec(), r, s_next, log_probs[i]));
        }
        for i in 0..n {
            if alive[i] {
                current.row_mut(i).assign(&next.row(i));
            }
        }
        if !alive.iter().any(|&a| a) {
            break;
        }
    }
    let mut builder = BatchBuilder::new();
    for (i, path) in paths.into_iter().enumerate() {
        builder.begin_path();
        let boot = if truncated[i] { current.row(i).to_vec() } else { path.last().map(|p| p.3.clone()).unwrap_or_else(|| current.row(i).to_vec()) };
        for (s, a, r, s_next, lp) in path {
            builder.push(s, a, r, s_next, lp);
        }
        builder.end_path(Some(boot), truncated[i]);
    }
    if builder.is_empty() {
        return Err(Error::Numeric("every imagined path diverged on its first step".into()));
    }
    builder.finish(value_fn, cfg.gamma, cfg.gae_lambda)
}
