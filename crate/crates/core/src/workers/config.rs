use crate::dynamics::EnsembleConfig;
use crate::error::{invalid, Result};
use crate::policy::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    AsyncRealtime,
    AsyncVirtual,
    Sync,
    PartialModelPolicy,
    PartialPolicyData,
    /// PPO on real trajectories only, no model.
    ModelFree,
}

impl RunMode {
    pub const ALL: [RunMode; 6] = [
        RunMode::AsyncRealtime,
        RunMode::AsyncVirtual,
        RunMode::Sync,
        RunMode::PartialModelPolicy,
        RunMode::PartialPolicyData,
        RunMode::ModelFree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunMode::AsyncRealtime => "async_realtime",
            RunMode::AsyncVirtual => "async_virtual",
            RunMode::Sync => "sync",
            RunMode::PartialModelPolicy => "partial_model_policy",
            RunMode::PartialPolicyData => "partial_policy_data",
            RunMode::ModelFree => "model_free",
        }
    }

    pub fn is_async(self) -> bool {
        matches!(self, RunMode::AsyncRealtime | RunMode::AsyncVirtual)
    }
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        RunMode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = RunMode::ALL.iter().map(|m| m.name()).collect();
            format!("unknown mode '{s}', expected one of {}", names.join(", "))
        })
    }
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopCriterion {
    pub max_trajectories: u64,
}

/// Virtual seconds per unit of learner work. Rollout time comes from the
/// environment: `H·dt / speed_multiplier`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub epoch_duration: f64,
    pub grad_step_duration: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            epoch_duration: 0.5,
            grad_step_duration: 0.1,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epoch_duration", self.epoch_duration), ("grad_step_duration", self.grad_step_duration)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `n` rollouts per phase, `e` model epochs and `g` policy steps per
/// alternation. The sync and model-free modes use `n` and `g` too.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationParams {
    pub n: usize,
    pub e: usize,
    pub g: usize,
}

impl Default for AblationParams {
    fn default() -> Self {
        AblationParams { n: 1, e: 5, g: 100 }
    }
}

impl AblationParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("ablation.n must be at least 1"));
        }
        if self.e == 0 {
            return Err(invalid("ablation.e must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub ensemble: EnsembleConfig,
    /// `None` disables early stopping.
    pub beta_ema: Option<f64>,
    /// Local dataset capacity in transitions.
    pub capacity: usize,
    pub validation_fraction: f64,
    /// Epoch cap per fitting phase in the non-async modes.
    pub max_epochs_per_iteration: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            ensemble: EnsembleConfig::default(),
            beta_ema: Some(0.6),
            capacity: 20 * crate::envs::DEFAULT_HORIZON,
            validation_fraction: 0.1,
            max_epochs_per_iteration: 50,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble.k == 0 {
            return Err(invalid("model.k must be at least 1"));
        }
        if self.ensemble.batch_size == 0 {
            return Err(invalid("model.batch_size must be at least 1"));
        }
        if !(self.ensemble.lr > 0.0 && self.ensemble.lr.is_finite()) {
            return Err(invalid("model.lr must be positive"));
        }
        if let Some(b) = self.beta_ema {
            if !(0.0..1.0).contains(&b) {
                return Err(invalid(format!("model.beta_ema must lie in [0, 1), got {b}")));
            }
        }
        if self.capacity == 0 {
            return Err(invalid("model.capacity must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(invalid("model.validation_fraction must lie in [0, 1)"));
        }
        if self.max_epochs_per_iteration == 0 {
            return Err(invalid("model.max_epochs_per_iteration must be at least 1"));
        }
        Ok(())
    }
}

/// Everything one seeded run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: String,
    /// Overrides the environment's default control period.
    pub dt: Option<f64>,
    pub horizon: usize,
    pub mode: RunMode,
    pub stop: StopCriterion,
    pub seed: u64,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub ablation: AblationParams,
    pub speed_multiplier: f64,
    pub cost: CostModel,
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Number of most recent real states imagined rollouts start from.
    pub init_state_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: "pendulum".into(),
            dt: None,
            horizon: crate::envs::DEFAULT_HORIZON,
            mode: RunMode::AsyncVirtual,
            stop: StopCriterion { max_trajectories: 100 },
            seed: 0,
            train: TrainConfig::default(),
            model: ModelConfig::default(),
            ablation: AblationParams::default(),
            speed_multiplier: 1.0,
            cost: CostModel::default(),
            eval_every: 5,
            eval_episodes: 5,
            init_state_window: 2000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        crate::envs::make_env(&self.env, self.dt, self.horizon)?.spec().validate()?;
        if self.stop.max_trajectories == 0 {
            return Err(invalid("run.max_trajectories must be at least 1"));
        }
        self.train.validate()?;
        self.model.validate()?;
        self.ablation.validate()?;
        self.cost.validate()?;
        if !(self.speed_multiplier > 0.0 && self.speed_multiplier.is_finite()) {
            return Err(invalid("run.speed_multiplier must be positive"));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(invalid("eval_every and eval_episodes must be at least 1"));
        }
        if self.init_state_window == 0 {
            return Err(invalid("init_state_window must be at least 1"));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over `(seed, stream, index)`; independent streams
/// for every stochastic component of a run.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB))
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream indices for `derive_seed`; each consumer of randomness owns one.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const DATA: u64 = 1;
    pub const MODEL: u64 = 2;
    pub const POLICY: u64 = 3;
    pub const SCHEDULER: u64 = 4;
    pub const ENV: u64 = 5;
    pub const EVAL: u64 = 6;
}
