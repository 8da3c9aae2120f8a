use ndarray::Array2;

use super::{GaussianPolicy, ImaginedBatch, TrainConfig, ValueFunction};
use crate::error::{ensure_len, Error, Result};
use crate::nn::{backward_batch, forward_batch_cached, gaussian_entropy, AdamConfig, AdamState, ParamVector};

/// `min(ρ·A, clip(ρ, 1−ε, 1+ε)·A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// `∂/∂ρ` of [`clipped_surrogate`]; zero where the clipped branch is active.
fn surrogate_slope(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = (advantage >= 0.0 && ratio > 1.0 + eps) || (advantage < 0.0 && ratio < 1.0 - eps);
    if clipped {
        0.0
    } else {
        advantage
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PpoStats {
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Set when the step was skipped because of a non-finite loss or gradient.
    pub skipped: Option<String>,
}

/// Adam moments for the mean network, `log_std` and the value network.
#[derive(Debug, Clone)]
pub struct PpoOptimizer {
    pub policy: AdamState,
    pub log_std: AdamState,
    pub value: AdamState,
}

impl PpoOptimizer {
    pub fn new(policy: &GaussianPolicy, value_fn: &ValueFunction, cfg: &TrainConfig) -> Self {
        let p = AdamConfig::with_lr(cfg.policy_lr);
        PpoOptimizer {
            policy: AdamState::new(policy.params.len(), p),
            log_std: AdamState::new(policy.act_dim(), p),
            value: AdamState::new(value_fn.params.len(), AdamConfig::with_lr(cfg.value_lr)),
        }
    }
}

struct SurrogateEval {
    objective: f64,
    param_grad: ParamVector,
    log_std_grad: Vec<f64>,
    clip_fraction: f64,
}

fn evaluate(policy: &GaussianPolicy, batch: &ImaginedBatch, eps: f64, entropy_coef: f64) -> Result<SurrogateEval> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::Precondition("empty batch".into()));
    }
    ensure_len("batch advantages", batch.advantages.len(), n)?;
    ensure_len("batch old_log_probs", batch.old_log_probs.len(), n)?;
    let (means, cache) = forward_batch_cached(&policy.spec, &policy.params, batch.states.view())?;
    let log_probs = policy.log_probs(means.view(), batch.actions.view());
    let inv_std: Vec<f64> = policy.log_std().iter().map(|l| (-l).exp()).collect();
    let act_dim = policy.act_dim();
    let nf = n as f64;
    let mut objective = 0.0;
    let mut clipped = 0usize;
    let mut upstream = Array2::zeros((n, act_dim));
    let mut log_std_grad = vec![entropy_coef; act_dim];
    for i in 0..n {
        let ratio = (log_probs[i] - batch.old_log_probs[i]).exp();
        let adv = batch.advantages[i];
        objective += clipped_surrogate(ratio, adv, eps) / nf;
        let slope = surrogate_slope(ratio, adv, eps);
        if slope == 0.0 && adv != 0.0 {
            clipped += 1;
        }
        // ∂L/∂log π = ρ·∂L/∂ρ
        let g = slope * ratio / nf;
        for d in 0..act_dim {
            let z = (batch.actions[[i, d]] - means[[i, d]]) * inv_std[d];
            upstream[[i, d]] = g * z * inv_std[d];
            log_std_grad[d] += g * (z * z - 1.0);
        }
    }
    objective += entropy_coef * gaussian_entropy(policy.log_std());
    let (param_grad, _) = backward_batch(&policy.spec, &policy.params, &cache, upstream.view())?;
    Ok(SurrogateEval {
        objective,
        param_grad,
        log_std_grad,
        clip_fraction: clipped as f64 / nf,
    })
}

/// `E[min(ρA, clip(ρ)A)] + c·H[π]` with `ρ` against the batch's stored log-probs.
pub fn surrogate_objective(policy: &GaussianPolicy, batch: &ImaginedBatch, eps: f64, entropy_coef: f64) -> Result<f64> {
    Ok(evaluate(policy, batch, eps, entropy_coef)?.objective)
}

/// Gradient of [`surrogate_objective`] with respect to the mean-network
/// parameters and `log_std`.
pub fn surrogate_gradient(policy: &GaussianPolicy, batch: &ImaginedBatch, eps: f64, entropy_coef: f64) -> Result<(ParamVector, Vec<f64>)> {
    let e = evaluate(policy, batch, eps, entropy_coef)?;
    Ok((e.param_grad, e.log_std_grad))
}

/// One Adam ascent step on the clipped surrogate and one Adam descent step on
/// the value MSE. A non-finite loss or gradient skips both steps.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    value_fn: &mut ValueFunction,
    batch: &ImaginedBatch,
    cfg: &TrainConfig,
    opt: &mut PpoOptimizer,
) -> Result<PpoStats> {
    let eval = evaluate(policy, batch, cfg.clip_eps, cfg.entropy_coef)?;
    ensure_len("batch value targets", batch.value_targets.len(), batch.len())?;
    let (values, vcache) = forward_batch_cached(&value_fn.spec, &value_fn.params, batch.states.view())?;
    let nf = batch.len() as f64;
    let mut value_loss = 0.0;
    let mut vgrad = Array2::zeros((batch.len(), 1));
    for i in 0..batch.len() {
        let r = values[[i, 0]] - batch.value_targets[i];
        value_loss += r * r / nf;
        vgrad[[i, 0]] = 2.0 * r / nf;
    }
    let (value_grad, _) = backward_batch(&value_fn.spec, &value_fn.params, &vcache, vgrad.view())?;
    let mut stats = PpoStats {
        surrogate: eval.objective,
        value_loss,
        entropy: gaussian_entropy(policy.log_std()),
        clip_fraction: eval.clip_fraction,
        skipped: None,
    };
    let finite = eval.objective.is_finite()
        && value_loss.is_finite()
        && eval.param_grad.is_finite()
        && eval.log_std_grad.iter().all(|g| g.is_finite())
        && value_grad.is_finite();
    if !finite {
        stats.skipped = Some("non-finite PPO loss or gradient".into());
        return Ok(stats);
    }
    // Adam minimizes, the surrogate is maximized
    let neg_param: Vec<f64> = eval.param_grad.iter().map(|g| -g).collect();
    let neg_log_std: Vec<f64> = eval.log_std_grad.iter().map(|g| -g).collect();
    opt.policy.step(policy.params.as_mut_slice(), &neg_param)?;
    opt.log_std.step(policy.log_std_mut(), &neg_log_std)?;
    policy.clamp_log_std();
    opt.value.step(value_fn.params.as_mut_slice(), &value_grad)?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_env, seeded_rng};
    use crate::policy::BatchBuilder;
    use crate::SimRng;
    use proptest::prelude::*;

    fn small(cfg: &TrainConfig, rng: &mut SimRng) -> (GaussianPolicy, ValueFunction) {
        (
            GaussianPolicy::new(3, 2, cfg, rng).unwrap(),
            ValueFunction::new(3, cfg, rng).unwrap(),
        )
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            policy_hidden: vec![5],
            value_hidden: vec![5],
            ..TrainConfig::default()
        }
    }

    /// 4 samples drawn from `policy`; `ratio_shift` offsets the stored log-probs.
    fn batch(policy: &GaussianPolicy, value_fn: &ValueFunction, ratio_shift: &[f64], rng: &mut SimRng) -> ImaginedBatch {
        let mut b = BatchBuilder::new();
        b.begin_path();
        for (i, shift) in ratio_shift.iter().enumerate() {
            let s = vec![0.3 * i as f64, -0.5, 1.0 - 0.2 * i as f64];
            let (a, lp) = policy.sample_action(&s, rng).unwrap();
            b.push(s.clone(), a, (i as f64) - 1.5, s, lp - shift);
        }
        b.end_path(None, false);
        b.finish(value_fn, 0.9, 0.9).unwrap()
    }

    #[test]
    fn scalar_clip_examples() {
        assert!((clipped_surrogate(2.0, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clipped_surrogate(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn clip_inactive_inside_trust_region(r in 0.8..1.2f64, a in -10.0..10.0f64) {
            prop_assert_eq!(clipped_surrogate(r, a, 0.2), r * a);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded_rng(11);
        let c = TrainConfig { entropy_coef: 0.01, ..cfg() };
        let (p, v) = small(&c, &mut rng);
        // ratios e^{±0.05}, e^{0.1}: inside the clip range and away from its edges
        let b = batch(&p, &v, &[0.05, -0.05, 0.1, 0.0], &mut rng);
        let (g, gl) = surrogate_gradient(&p, &b, 0.2, 0.01).unwrap();
        let h = 1e-6;
        let f = |q: &GaussianPolicy| surrogate_objective(q, &b, 0.2, 0.01).unwrap();
        for k in 0..p.params.len() {
            let mut plus = p.clone();
            plus.params.as_mut_slice()[k] += h;
            let mut minus = p.clone();
            minus.params.as_mut_slice()[k] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(1e-3), "param {k}: {fd} vs {}", g[k]);
        }
        for d in 0..2 {
            let mut plus = p.clone();
            let mut ls = p.log_std().to_vec();
            ls[d] += h;
            plus.set_log_std(ls.clone()).unwrap();
            let mut minus = p.clone();
            ls[d] -= 2.0 * h;
            minus.set_log_std(ls).unwrap();
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!((fd - gl[d]).abs() <= 1e-4 * fd.abs().max(1e-3), "log_std {d}: {fd} vs {}", gl[d]);
        }
    }

    #[test]
    fn unit_ratio_gives_plain_policy_gradient() {
        let mut rng = seeded_rng(12);
        let (p, v) = small(&cfg(), &mut rng);
        let b = batch(&p, &v, &[0.0; 4], &mut rng);
        let (g, gl) = surrogate_gradient(&p, &b, 0.2, 0.0).unwrap();
        // mean of A·∇log π, computed per sample through the single-row path
        let mut expect = vec![0.0; p.params.len()];
        let mut expect_ls = [0.0; 2];
        for i in 0..4 {
            let row = b.states.row(i).to_owned().insert_axis(ndarray::Axis(0));
            let (m, cache) = forward_batch_cached(&p.spec, &p.params, row.view()).unwrap();
            let mut up = Array2::zeros((1, 2));
            for d in 0..2 {
                let sd = p.log_std()[d].exp();
                let z = (b.actions[[i, d]] - m[[0, d]]) / sd;
                up[[0, d]] = z / sd;
                expect_ls[d] += b.advantages[i] * (z * z - 1.0) / 4.0;
            }
            let (gi, _) = backward_batch(&p.spec, &p.params, &cache, up.view()).unwrap();
            for k in 0..expect.len() {
                expect[k] += b.advantages[i] * gi[k] / 4.0;
            }
        }
        for k in 0..expect.len() {
            assert!((expect[k] - g[k]).abs() < 1e-12);
        }
        for d in 0..2 {
            assert!((expect_ls[d] - gl[d]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut rng = seeded_rng(13);
        let c = TrainConfig { policy_lr: 0.0, value_lr: 0.0, ..cfg() };
        let (mut p, mut v) = small(&c, &mut rng);
        let b = batch(&p, &v, &[0.0; 4], &mut rng);
        let (p0, v0) = (p.clone(), v.clone());
        let mut opt = PpoOptimizer::new(&p, &v, &c);
        let stats = ppo_update(&mut p, &mut v, &b, &c, &mut opt).unwrap();
        assert!(stats.skipped.is_none());
        assert_eq!(p, p0);
        assert_eq!(v, v0);
        let s = [0.1, 0.2, 0.3];
        assert_eq!(p.sample_action(&s, &mut seeded_rng(5)).unwrap(), p0.sample_action(&s, &mut seeded_rng(5)).unwrap());
    }

    #[test]
    fn non_finite_batch_is_skipped() {
        let mut rng = seeded_rng(14);
        let c = cfg();
        let (mut p, mut v) = small(&c, &mut rng);
        let mut b = batch(&p, &v, &[0.0; 4], &mut rng);
        b.advantages[2] = f64::NAN;
        let (p0, v0) = (p.clone(), v.clone());
        let mut opt = PpoOptimizer::new(&p, &v, &c);
        let stats = ppo_update(&mut p, &mut v, &b, &c, &mut opt).unwrap();
        assert!(stats.skipped.is_some());
        assert_eq!((p, v), (p0, v0));
        assert_eq!(opt.policy.steps(), 0);
    }

    #[test]
    fn repeated_updates_raise_the_surrogate_and_fit_values() {
        let mut rng = seeded_rng(15);
        let c = TrainConfig { policy_lr: 1e-2, value_lr: 1e-2, ..cfg() };
        let (mut p, mut v) = small(&c, &mut rng);
        let b = batch(&p, &v, &[0.0; 4], &mut rng);
        let mut opt = PpoOptimizer::new(&p, &v, &c);
        let first = ppo_update(&mut p, &mut v, &b, &c, &mut opt).unwrap();
        let mut last = first.clone();
        for _ in 0..50 {
            last = ppo_update(&mut p, &mut v, &b, &c, &mut opt).unwrap();
        }
        assert!(last.surrogate > first.surrogate);
        assert!(last.value_loss < first.value_loss);
        let _ = make_env("pendulum", None, 10).unwrap();
    }
}
