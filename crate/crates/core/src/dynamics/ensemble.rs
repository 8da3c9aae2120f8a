use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::buffer::{DatasetBuffer, Sample, Split};
use super::normalizer::{Normalizer, Standardizer};
use super::DynamicsModel;
use crate::error::{ensure_len, invalid, Error, Result};
use crate::nn::{
    backward_batch, forward_batch, forward_batch_cached, Activation, AdamConfig, AdamState, MlpSpec, ParamVector,
    HALF_LN_2PI,
};
use crate::SimRng;

pub const MODEL_LOG_STD_MIN: f64 = -6.0;
pub const MODEL_LOG_STD_MAX: f64 = 1.0;
/// Imagined states are clamped to this many standard deviations of the data.
pub const STATE_CLIP: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub k: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    pub batch_size: usize,
    /// Sample from the learned Gaussian instead of returning its mean.
    pub stochastic: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            k: 4,
            hidden: vec![64, 64],
            activation: Activation::Relu,
            lr: 1e-3,
            batch_size: 64,
            stochastic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub params: ParamVector,
    /// State-independent log standard deviation of the normalized `Δs`.
    pub log_std: Vec<f64>,
}

/// K delta-predicting networks sharing one normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    obs_dim: usize,
    act_dim: usize,
    spec: MlpSpec,
    members: Vec<Member>,
    normalizer: Normalizer,
    stochastic: bool,
}

/// Adam moments for every member, owned by the model learner.
#[derive(Debug, Clone)]
pub struct EnsembleOptimizer {
    states: Vec<(AdamState, AdamState)>,
    batch_size: usize,
}

impl EnsembleOptimizer {
    pub fn new(ensemble: &Ensemble, lr: f64, batch_size: usize) -> Self {
        let cfg = AdamConfig::with_lr(lr);
        EnsembleOptimizer {
            states: ensemble
                .members
                .iter()
                .map(|m| (AdamState::new(m.params.len(), cfg), AdamState::new(m.log_std.len(), cfg)))
                .collect(),
            batch_size: batch_size.max(1),
        }
    }

    pub fn from_config(ensemble: &Ensemble, cfg: &EnsembleConfig) -> Self {
        Self::new(ensemble, cfg.lr, cfg.batch_size)
    }
}

impl Ensemble {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: &EnsembleConfig, rng: &mut SimRng) -> Result<Self> {
        if cfg.k == 0 {
            return Err(invalid("ensemble needs at least one model"));
        }
        let spec = MlpSpec::with_hidden(obs_dim + act_dim, &cfg.hidden, obs_dim, cfg.activation)?;
        let members = (0..cfg.k)
            .map(|_| Member {
                params: spec.init_params(rng),
                log_std: vec![0.0; obs_dim],
            })
            .collect();
        Ok(Ensemble {
            obs_dim,
            act_dim,
            spec,
            members,
            normalizer: Normalizer::identity(obs_dim + act_dim, obs_dim),
            stochastic: cfg.stochastic,
        })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Member] {
        &mut self.members
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn set_normalizer(&mut self, normalizer: Normalizer) -> Result<()> {
        ensure_len("normalizer input", normalizer.input.dim(), self.obs_dim + self.act_dim)?;
        ensure_len("normalizer target", normalizer.target.dim(), self.obs_dim)?;
        self.normalizer = normalizer;
        Ok(())
    }

    /// Refits input and `Δs` statistics on the training split.
    pub fn fit_normalizer(&mut self, buffer: &DatasetBuffer) -> Result<()> {
        self.check_buffer(buffer)?;
        let inputs: Vec<Vec<f64>> = buffer.split(Split::Train).map(input_row).collect();
        let targets: Vec<Vec<f64>> = buffer.split(Split::Train).map(delta_row).collect();
        self.normalizer = Normalizer {
            input: Standardizer::fit(self.obs_dim + self.act_dim, inputs.iter().map(|r| r.as_slice()))?,
            target: Standardizer::fit(self.obs_dim, targets.iter().map(|r| r.as_slice()))?,
            count: inputs.len() as u64,
        };
        Ok(())
    }

    fn check_buffer(&self, buffer: &DatasetBuffer) -> Result<()> {
        ensure_len("buffer obs_dim", buffer.obs_dim(), self.obs_dim)?;
        ensure_len("buffer act_dim", buffer.act_dim(), self.act_dim)
    }

    /// Normalized inputs and targets for one split, one sample per row.
    pub fn normalized_split(&self, buffer: &DatasetBuffer, split: Split) -> (Array2<f64>, Array2<f64>) {
        let samples: Vec<&Sample> = buffer.split(split).collect();
        let in_dim = self.obs_dim + self.act_dim;
        let mut x = Array2::zeros((samples.len(), in_dim));
        let mut y = Array2::zeros((samples.len(), self.obs_dim));
        for (i, s) in samples.iter().enumerate() {
            let xi = self.normalizer.input.normalize(&input_row(s));
            let yi = self.normalizer.target.normalize(&delta_row(s));
            x.row_mut(i).assign(&ndarray::ArrayView1::from(&xi));
            y.row_mut(i).assign(&ndarray::ArrayView1::from(&yi));
        }
        (x, y)
    }

    /// One pass over the training split for every member, each in its own
    /// shuffled order, minimizing the Gaussian negative log-likelihood of the
    /// normalized `Δs`. Returns each member's mean training loss.
    pub fn train_epoch(&mut self, buffer: &DatasetBuffer, opt: &mut EnsembleOptimizer, rng: &mut SimRng) -> Result<Vec<f64>> {
        self.check_buffer(buffer)?;
        ensure_len("optimizer states", opt.states.len(), self.members.len())?;
        let (x, y) = self.normalized_split(buffer, Split::Train);
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Precondition("training split is empty".into()));
        }
        let batch = opt.batch_size;
        let mut losses = Vec::with_capacity(self.members.len());
        for (member, (p_state, s_state)) in self.members.iter_mut().zip(opt.states.iter_mut()) {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut total = 0.0;
            for chunk in order.chunks(batch) {
                let xb = x.select(Axis(0), chunk);
                let yb = y.select(Axis(0), chunk);
                let (mean, cache) = forward_batch_cached(&self.spec, &member.params, xb.view())?;
                let b = chunk.len() as f64;
                let inv_var: Vec<f64> = member.log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
                let resid = &mean - &yb;
                let mut upstream = resid.clone();
                let mut log_std_grad = vec![0.0; self.obs_dim];
                let mut loss = 0.0;
                for (mut row, r_row) in upstream.rows_mut().into_iter().zip(resid.rows()) {
                    for d in 0..self.obs_dim {
                        let r = r_row[d];
                        let z2 = r * r * inv_var[d];
                        loss += member.log_std[d] + HALF_LN_2PI + 0.5 * z2;
                        log_std_grad[d] += (1.0 - z2) / b;
                        row[d] = r * inv_var[d] / b;
                    }
                }
                total += loss;
                let (grad, _) = backward_batch(&self.spec, &member.params, &cache, upstream.view())?;
                p_state.step(member.params.as_mut_slice(), &grad)?;
                s_state.step(&mut member.log_std, &log_std_grad)?;
                for ls in &mut member.log_std {
                    *ls = ls.clamp(MODEL_LOG_STD_MIN, MODEL_LOG_STD_MAX);
                }
            }
            let mean_loss = total / n as f64;
            if !mean_loss.is_finite() {
                return Err(Error::Numeric("non-finite model training loss".into()));
            }
            losses.push(mean_loss);
        }
        Ok(losses)
    }

    /// Mean negative log-likelihood of each member on a split.
    pub fn split_nll(&self, buffer: &DatasetBuffer, split: Split) -> Result<Vec<f64>> {
        self.check_buffer(buffer)?;
        let (x, y) = self.normalized_split(buffer, split);
        if x.nrows() == 0 {
            return Err(Error::Precondition(format!("{split:?} split is empty")));
        }
        self.members
            .iter()
            .map(|m| {
                let mean = forward_batch(&self.spec, &m.params, x.view())?;
                Ok(nll(&mean, &y, &m.log_std))
            })
            .collect()
    }

    /// Validation NLL averaged over the members.
    pub fn validation_loss(&self, buffer: &DatasetBuffer) -> Result<f64> {
        let per_model = self.split_nll(buffer, Split::Validation)?;
        Ok(per_model.iter().sum::<f64>() / per_model.len() as f64)
    }

    /// Mean squared error of the member means in normalized `Δs` units,
    /// averaged over members, samples and dimensions.
    pub fn normalized_mse(&self, buffer: &DatasetBuffer, split: Split) -> Result<f64> {
        let (x, y) = self.normalized_split(buffer, split);
        if x.nrows() == 0 {
            return Err(Error::Precondition(format!("{split:?} split is empty")));
        }
        let mut total = 0.0;
        for m in &self.members {
            let mean = forward_batch(&self.spec, &m.params, x.view())?;
            total += (&mean - &y).mapv(|v| v * v).mean().unwrap_or(0.0);
        }
        Ok(total / self.members.len() as f64)
    }

    /// Next state predicted by member `index` (mean head, no clipping).
    pub fn predict_with(&self, index: usize, s: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        let member = self
            .members
            .get(index)
            .ok_or_else(|| invalid(format!("model index {index} out of range")))?;
        ensure_len("state", s.len(), self.obs_dim)?;
        ensure_len("action", a.len(), self.act_dim)?;
        let mut input = s.to_vec();
        input.extend_from_slice(a);
        let xn = self.normalizer.input.normalize(&input);
        let row = ArrayView2::from_shape((1, xn.len()), &xn).expect("row");
        let out = forward_batch(&self.spec, &member.params, row)?;
        let delta = self.normalizer.target.denormalize(&out.row(0).to_vec());
        Ok(s.iter().zip(&delta).map(|(x, d)| x + d).collect())
    }

    /// Draws `I ~ U{0..K}` and returns member `I`'s clipped prediction.
    pub fn predict(&self, s: &[f64], a: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        let srow = ArrayView2::from_shape((1, s.len()), s).map_err(|e| invalid(e.to_string()))?;
        let arow = ArrayView2::from_shape((1, a.len()), a).map_err(|e| invalid(e.to_string()))?;
        let out = self.predict_batch(srow, arow, rng)?;
        let v = out.into_raw_vec_and_offset().0;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite model prediction".into()));
        }
        Ok(v)
    }

    /// Standard deviation across members of their mean predictions.
    pub fn disagreement(&self, s: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        let preds = (0..self.k())
            .map(|i| self.predict_with(i, s, a))
            .collect::<Result<Vec<_>>>()?;
        let k = preds.len() as f64;
        Ok((0..self.obs_dim)
            .map(|d| {
                let mean = preds.iter().map(|p| p[d]).sum::<f64>() / k;
                (preds.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / k).sqrt()
            })
            .collect())
    }

    fn clip_state(&self, s: &mut [f64]) {
        for (d, v) in s.iter_mut().enumerate() {
            let m = self.normalizer.input.mean[d];
            let sd = self.normalizer.input.std[d];
            *v = v.clamp(m - STATE_CLIP * sd, m + STATE_CLIP * sd);
        }
    }

    /// Serialized form: a header vector
    /// `[K, obs_dim, act_dim, activation, stochastic, n_layers, sizes…]`, then per
    /// member its parameters and log-std, then input mean/std, target
    /// mean/std, and `[count]`.
    pub fn to_vectors(&self) -> Vec<ParamVector> {
        let mut header = vec![
            self.k() as f64,
            self.obs_dim as f64,
            self.act_dim as f64,
            match self.spec.activation() {
                Activation::Tanh => 0.0,
                Activation::Relu => 1.0,
            },
            if self.stochastic { 1.0 } else { 0.0 },
            self.spec.layer_sizes().len() as f64,
        ];
        header.extend(self.spec.layer_sizes().iter().map(|&n| n as f64));
        let mut out = vec![ParamVector::new(header)];
        for m in &self.members {
            out.push(m.params.clone());
            out.push(ParamVector::new(m.log_std.clone()));
        }
        let n = &self.normalizer;
        out.push(ParamVector::new(n.input.mean.clone()));
        out.push(ParamVector::new(n.input.std.clone()));
        out.push(ParamVector::new(n.target.mean.clone()));
        out.push(ParamVector::new(n.target.std.clone()));
        out.push(ParamVector::new(vec![n.count as f64]));
        out
    }

    pub fn from_vectors(vectors: &[ParamVector]) -> Result<Self> {
        let header = vectors.first().ok_or_else(|| invalid("empty ensemble blob"))?;
        if header.len() < 6 {
            return Err(invalid("ensemble header too short"));
        }
        let as_usize = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
                Ok(v as usize)
            } else {
                Err(invalid(format!("bad integer {v} in ensemble header")))
            }
        };
        let k = as_usize(header[0])?;
        let obs_dim = as_usize(header[1])?;
        let act_dim = as_usize(header[2])?;
        let activation = match header[3] {
            0.0 => Activation::Tanh,
            1.0 => Activation::Relu,
            other => return Err(invalid(format!("bad activation code {other}"))),
        };
        let stochastic = header[4] == 1.0;
        let n_sizes = as_usize(header[5])?;
        ensure_len("ensemble header", header.len(), 6 + n_sizes)?;
        let sizes = header[6..].iter().map(|&v| as_usize(v)).collect::<Result<Vec<_>>>()?;
        let spec = MlpSpec::new(sizes, activation)?;
        ensure_len("ensemble input dim", spec.input_dim(), obs_dim + act_dim)?;
        ensure_len("ensemble output dim", spec.output_dim(), obs_dim)?;
        if k == 0 {
            return Err(invalid("ensemble blob with zero models"));
        }
        ensure_len("ensemble blob vectors", vectors.len(), 1 + 2 * k + 5)?;
        let mut members = Vec::with_capacity(k);
        for i in 0..k {
            let params = vectors[1 + 2 * i].clone();
            ensure_len("member params", params.len(), spec.param_count())?;
            let log_std = vectors[2 + 2 * i].as_slice().to_vec();
            ensure_len("member log_std", log_std.len(), obs_dim)?;
            members.push(Member { params, log_std });
        }
        let base = 1 + 2 * k;
        let std_of = |v: &ParamVector, dim: usize| -> Result<Vec<f64>> {
            ensure_len("normalizer vector", v.len(), dim)?;
            Ok(v.as_slice().to_vec())
        };
        let normalizer = Normalizer {
            input: Standardizer {
                mean: std_of(&vectors[base], obs_dim + act_dim)?,
                std: std_of(&vectors[base + 1], obs_dim + act_dim)?,
            },
            target: Standardizer {
                mean: std_of(&vectors[base + 2], obs_dim)?,
                std: std_of(&vectors[base + 3], obs_dim)?,
            },
            count: vectors[base + 4].first().map(|&c| c as u64).unwrap_or(0),
        };
        Ok(Ensemble {
            obs_dim,
            act_dim,
            spec,
            members,
            normalizer,
            stochastic,
        })
    }
}

impl DynamicsModel for Ensemble {
    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Each row independently draws its member uniformly at random.
    fn predict_batch(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>, rng: &mut SimRng) -> Result<Array2<f64>> {
        ensure_len("state width", states.ncols(), self.obs_dim)?;
        ensure_len("action width", actions.ncols(), self.act_dim)?;
        ensure_len("action rows", actions.nrows(), states.nrows())?;
        let n = states.nrows();
        let k = self.k();
        let picks: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let in_dim = self.obs_dim + self.act_dim;
        let mut x = Array2::zeros((n, in_dim));
        for i in 0..n {
            let mut row = states.row(i).to_vec();
            row.extend(actions.row(i).iter());
            let xn = self.normalizer.input.normalize(&row);
            x.row_mut(i).assign(&ndarray::ArrayView1::from(&xn));
        }
        let mut out = states.to_owned();
        for (member_idx, member) in self.members.iter().enumerate() {
            let rows: Vec<usize> = (0..n).filter(|&i| picks[i] == member_idx).collect();
            if rows.is_empty() {
                continue;
            }
            let xb = x.select(Axis(0), &rows);
            let mean = forward_batch(&self.spec, &member.params, xb.view())?;
            for (j, &i) in rows.iter().enumerate() {
                let mut z = mean.row(j).to_vec();
                if self.stochastic {
                    for (zd, ls) in z.iter_mut().zip(&member.log_std) {
                        let eps: f64 = rng.sample(StandardNormal);
                        *zd += ls.exp() * eps;
                    }
                }
                let delta = self.normalizer.target.denormalize(&z);
                let mut next: Vec<f64> = out.row(i).iter().zip(&delta).map(|(s, d)| s + d).collect();
                self.clip_state(&mut next);
                out.row_mut(i).assign(&ndarray::ArrayView1::from(&next));
            }
        }
        Ok(out)
    }
}

fn input_row(s: &Sample) -> Vec<f64> {
    let mut v = s.s.clone();
    v.extend_from_slice(&s.a);
    v
}

fn delta_row(s: &Sample) -> Vec<f64> {
    s.s_next.iter().zip(&s.s).map(|(n, c)| n - c).collect()
}

fn nll(mean: &Array2<f64>, target: &Array2<f64>, log_std: &[f64]) -> f64 {
    let n = mean.nrows().max(1) as f64;
    let mut total = 0.0;
    for (m_row, y_row) in mean.rows().into_iter().zip(target.rows()) {
        for d in 0..log_std.len() {
            let z = (y_row[d] - m_row[d]) * (-log_std[d]).exp();
            total += log_std[d] + HALF_LN_2PI + 0.5 * z * z;
        }
    }
    total / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{seeded_rng, Trajectory, Transition};

    fn linear_step(s: &[f64], a: &[f64]) -> Vec<f64> {
        vec![0.9 * s[0] + 0.1 * s[1], -0.2 * s[0] + 0.95 * s[1] + 0.5 * a[0]]
    }

    fn linear_data(n: usize, seed: u64) -> Trajectory {
        let mut rng = seeded_rng(seed);
        let transitions = (0..n)
            .map(|t| {
                let s = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let a = vec![rng.random_range(-1.0..1.0)];
                let s_next = linear_step(&s, &a);
                Transition { s, a, s_next, r: 0.0, t }
            })
            .collect();
        Trajectory {
            transitions,
            return_undiscounted: 0.0,
            env_seed: seed,
        }
    }

    fn constant_members(k: usize, obs_dim: usize) -> Ensemble {
        let cfg = EnsembleConfig {
            k,
            hidden: vec![4],
            ..EnsembleConfig::default()
        };
        let mut e = Ensemble::new(obs_dim, 1, &cfg, &mut seeded_rng(0)).unwrap();
        for (i, m) in e.members_mut().iter_mut().enumerate() {
            let n = m.params.len();
            let p = m.params.as_mut_slice();
            p.iter_mut().for_each(|v| *v = 0.0);
            p[n - obs_dim..].iter_mut().for_each(|v| *v = i as f64);
        }
        e
    }

    #[test]
    fn learns_a_linear_system() {
        let mut buffer = DatasetBuffer::new(2, 1, 2000, 0.1).unwrap();
        buffer.append(&linear_data(1000, 1)).unwrap();
        let mut rng = seeded_rng(2);
        let cfg = EnsembleConfig {
            hidden: vec![32, 32],
            ..EnsembleConfig::default()
        };
        let mut e = Ensemble::new(2, 1, &cfg, &mut rng).unwrap();
        e.fit_normalizer(&buffer).unwrap();
        let mut opt = EnsembleOptimizer::from_config(&e, &cfg);
        let initial = e.normalized_mse(&buffer, Split::Validation).unwrap();
        for _ in 0..150 {
            e.train_epoch(&buffer, &mut opt, &mut rng).unwrap();
        }
        let fin = e.normalized_mse(&buffer, Split::Validation).unwrap();
        assert!(fin * 10.0 < initial, "{initial} -> {fin}");
        // mean absolute one-step error, in units of the Δs standard deviation
        let test = linear_data(200, 99);
        let std = &e.normalizer().target.std;
        let mut err = 0.0;
        for tr in &test.transitions {
            let p = e.predict(&tr.s, &tr.a, &mut rng).unwrap();
            for d in 0..2 {
                err += (p[d] - tr.s_next[d]).abs() / std[d];
            }
        }
        err /= 400.0;
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn member_selection_is_uniform() {
        let e = constant_members(4, 1);
        let mut rng = seeded_rng(7);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let p = e.predict(&[0.0], &[0.0], &mut rng).unwrap();
            counts[p[0].round() as usize] += 1;
        }
        for c in counts {
            assert!((2350..=2650).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn batch_rows_choose_members_independently() {
        let e = constant_members(3, 1);
        let s = Array2::zeros((3000, 1));
        let a = Array2::zeros((3000, 1));
        let out = e.predict_batch(s.view(), a.view(), &mut seeded_rng(3)).unwrap();
        for i in 0..3 {
            let c = out.iter().filter(|v| v.round() as usize == i).count();
            assert!((850..=1150).contains(&c), "{i}: {c}");
        }
    }

    #[test]
    fn validation_nll_matches_hand_computation() {
        // identity normalizer, zero means, unit std: NLL = Σ_d ½ln2π + ½y_d²
        let mut e = constant_members(2, 1);
        for m in e.members_mut() {
            m.params.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        }
        let deltas = [0.5, -1.0, 2.0];
        let transitions = (0..6)
            .map(|t| Transition {
                s: vec![0.0],
                a: vec![0.0],
                s_next: vec![if t % 2 == 1 { deltas[t / 2] } else { 9.0 }],
                r: 0.0,
                t,
            })
            .collect();
        let mut buffer = DatasetBuffer::new(1, 1, 10, 0.5).unwrap();
        buffer
            .append(&Trajectory {
                transitions,
                return_undiscounted: 0.0,
                env_seed: 0,
            })
            .unwrap();
        assert_eq!(buffer.count(Split::Validation), 3);
        let expected = deltas.iter().map(|y| HALF_LN_2PI + 0.5 * y * y).sum::<f64>() / 3.0;
        assert!((e.validation_loss(&buffer).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_splits_are_preconditions() {
        let cfg = EnsembleConfig::default();
        let mut e = Ensemble::new(2, 1, &cfg, &mut seeded_rng(0)).unwrap();
        let buffer = DatasetBuffer::new(2, 1, 10, 0.1).unwrap();
        let mut opt = EnsembleOptimizer::from_config(&e, &cfg);
        assert!(matches!(
            e.train_epoch(&buffer, &mut opt, &mut seeded_rng(0)),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(e.validation_loss(&buffer), Err(Error::Precondition(_))));
    }

    #[test]
    fn vectors_round_trip() {
        let mut buffer = DatasetBuffer::new(2, 1, 100, 0.1).unwrap();
        buffer.append(&linear_data(50, 4)).unwrap();
        let cfg = EnsembleConfig {
            k: 3,
            hidden: vec![8],
            activation: Activation::Tanh,
            stochastic: true,
            ..EnsembleConfig::default()
        };
        let mut e = Ensemble::new(2, 1, &cfg, &mut seeded_rng(5)).unwrap();
        e.fit_normalizer(&buffer).unwrap();
        let back = Ensemble::from_vectors(&e.to_vectors()).unwrap();
        assert_eq!(back, e);
        let mut v = e.to_vectors();
        v.pop();
        assert!(Ensemble::from_vectors(&v).is_err());
    }

    #[test]
    fn disagreement_vanishes_for_identical_members() {
        let mut e = constant_members(3, 2);
        let first = e.members()[0].clone();
        for m in e.members_mut() {
            *m = first.clone();
        }
        assert!(e.disagreement(&[0.1, 0.2], &[0.3]).unwrap().iter().all(|v| v.abs() < 1e-15));
        let e = constant_members(2, 1);
        assert!((e.disagreement(&[0.0], &[0.0]).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn predictions_are_clipped_in_normalized_units() {
        let mut e = constant_members(1, 1);
        let n = e.members()[0].params.len();
        e.members_mut()[0].params.as_mut_slice()[n - 1] = 1e6;
        let p = e.predict(&[0.0], &[0.0], &mut seeded_rng(0)).unwrap();
        assert_eq!(p, vec![STATE_CLIP]);
    }
}
