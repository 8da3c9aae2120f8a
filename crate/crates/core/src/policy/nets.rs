use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::TrainConfig;
use crate::error::{ensure_len, Result};
use crate::nn::{forward_batch, gaussian_log_density, mlp_forward, MlpSpec, ParamVector, HALF_LN_2PI};
use crate::SimRng;

pub const POLICY_LOG_STD_MIN: f64 = -5.0;
pub const POLICY_LOG_STD_MAX: f64 = 1.0;

/// `π_θ(a|s) = N(μ_θ(s), diag(exp(log_std))²)`; `θ` is the mean network
/// parameters together with `log_std`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub spec: MlpSpec,
    pub params: ParamVector,
    log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: &TrainConfig, rng: &mut SimRng) -> Result<Self> {
        let spec = MlpSpec::with_hidden(obs_dim, &cfg.policy_hidden, act_dim, cfg.activation)?;
        let mut params = spec.init_params(rng);
        // small output layer keeps the initial mean near zero
        let out_w = act_dim * spec.layer_sizes()[spec.num_layers() - 1];
        let start = params.len() - act_dim - out_w;
        for w in &mut params.as_mut_slice()[start..start + out_w] {
            *w *= 0.01;
        }
        let mut policy = GaussianPolicy {
            spec,
            params,
            log_std: vec![0.0; act_dim],
        };
        policy.set_log_std(vec![cfg.init_log_std; act_dim])?;
        Ok(policy)
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    /// Stores `log_std` clamped to `[POLICY_LOG_STD_MIN, POLICY_LOG_STD_MAX]`.
    pub fn set_log_std(&mut self, log_std: Vec<f64>) -> Result<()> {
        ensure_len("policy log_std", log_std.len(), self.act_dim())?;
        self.log_std = log_std
            .into_iter()
            .map(|v| v.clamp(POLICY_LOG_STD_MIN, POLICY_LOG_STD_MAX))
            .collect();
        Ok(())
    }

    pub(crate) fn log_std_mut(&mut self) -> &mut Vec<f64> {
        &mut self.log_std
    }

    pub(crate) fn clamp_log_std(&mut self) {
        for v in &mut self.log_std {
            *v = v.clamp(POLICY_LOG_STD_MIN, POLICY_LOG_STD_MAX);
        }
    }

    pub fn mean(&self, s: &[f64]) -> Result<Vec<f64>> {
        mlp_forward(&self.spec, &self.params, s)
    }

    pub fn mean_batch(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        forward_batch(&self.spec, &self.params, states)
    }

    /// `a = μ(s) + exp(log_std)⊙z` with `z ~ N(0, I)`.
    pub fn sample_action(&self, s: &[f64], rng: &mut SimRng) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(s)?;
        let a: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = gaussian_log_density(&mean, &self.log_std, &a)?;
        Ok((a, lp))
    }

    /// Row-wise log-density of `actions` given precomputed means.
    pub fn log_probs(&self, means: ArrayView2<f64>, actions: ArrayView2<f64>) -> Vec<f64> {
        means
            .rows()
            .into_iter()
            .zip(actions.rows())
            .map(|(m, a)| {
                m.iter()
                    .zip(a.iter())
                    .zip(&self.log_std)
                    .map(|((m, a), ls)| {
                        let z = (a - m) * (-ls).exp();
                        -0.5 * z * z - ls - HALF_LN_2PI
                    })
                    .sum()
            })
            .collect()
    }

    /// Serialized form: `[mean-net parameters, log_std]`.
    pub fn to_vectors(&self) -> Vec<ParamVector> {
        vec![self.params.clone(), ParamVector::new(self.log_std.clone())]
    }

    /// Loads parameters produced by `to_vectors` of a same-shaped policy.
    pub fn load_vectors(&mut self, vectors: &[ParamVector]) -> Result<()> {
        ensure_len("policy blob vectors", vectors.len(), 2)?;
        ensure_len("policy params", vectors[0].len(), self.spec.param_count())?;
        self.set_log_std(vectors[1].as_slice().to_vec())?;
        self.params = vectors[0].clone();
        Ok(())
    }
}

/// State-value baseline `V(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl ValueFunction {
    pub fn new(obs_dim: usize, cfg: &TrainConfig, rng: &mut SimRng) -> Result<Self> {
        let spec = MlpSpec::with_hidden(obs_dim, &cfg.value_hidden, 1, cfg.activation)?;
        let params = spec.init_params(rng);
        Ok(ValueFunction { spec, params })
    }

    pub fn value(&self, s: &[f64]) -> Result<f64> {
        Ok(mlp_forward(&self.spec, &self.params, s)?[0])
    }

    pub fn values(&self, states: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(forward_batch(&self.spec, &self.params, states)?.into_raw_vec_and_offset().0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::seeded_rng;

    fn policy(log_std: f64) -> GaussianPolicy {
        let cfg = TrainConfig {
            policy_hidden: vec![8],
            init_log_std: log_std,
            ..TrainConfig::default()
        };
        GaussianPolicy::new(3, 2, &cfg, &mut seeded_rng(1)).unwrap()
    }

    #[test]
    fn minimum_std_sample_hugs_the_mean() {
        let p = policy(-50.0);
        assert_eq!(p.log_std(), &[POLICY_LOG_STD_MIN; 2]);
        let mut rng = seeded_rng(2);
        let s = [0.3, -0.1, 0.8];
        let mean = p.mean(&s).unwrap();
        for _ in 0..100 {
            let (a, _) = p.sample_action(&s, &mut rng).unwrap();
            for (x, m) in a.iter().zip(&mean) {
                // |z| < 4.5 holds for every draw here
                assert!((x - m).abs() < 4.5 * (-5.0f64).exp());
            }
        }
    }

    #[test]
    fn reported_log_prob_is_the_density() {
        let p = policy(0.3);
        let mut rng = seeded_rng(3);
        let s = [1.0, 2.0, -1.0];
        let (a, lp) = p.sample_action(&s, &mut rng).unwrap();
        assert_eq!(lp, gaussian_log_density(&p.mean(&s).unwrap(), p.log_std(), &a).unwrap());
        let m = ndarray::arr2(&[[p.mean(&s).unwrap()[0], p.mean(&s).unwrap()[1]]]);
        let av = ndarray::arr2(&[[a[0], a[1]]]);
        assert!((p.log_probs(m.view(), av.view())[0] - lp).abs() < 1e-12);
    }

    #[test]
    fn empirical_mean_matches() {
        let p = policy(0.0);
        let mut rng = seeded_rng(4);
        let s = [0.5, 0.5, 0.5];
        let mean = p.mean(&s).unwrap();
        let n = 10_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let (a, _) = p.sample_action(&s, &mut rng).unwrap();
            acc[0] += a[0];
            acc[1] += a[1];
        }
        for d in 0..2 {
            assert!((acc[d] / n as f64 - mean[d]).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn vectors_round_trip() {
        let p = policy(-0.5);
        let mut q = policy(0.0);
        q.params.as_mut_slice()[0] += 1.0;
        q.load_vectors(&p.to_vectors()).unwrap();
        assert_eq!(p, q);
        assert!(q.load_vectors(&p.to_vectors()[..1]).is_err());
    }
}
