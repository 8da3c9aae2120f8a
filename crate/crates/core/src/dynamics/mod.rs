//! Learned dynamics: the model learner's dataset, normalization, early
//! stopping and the probabilistic ensemble.

mod buffer;
mod early_stop;
mod ensemble;
mod normalizer;

pub use buffer::{DatasetBuffer, Sample, Split};
pub use early_stop::{reset_tracker_on_new_data, should_stop, ValidationTracker};
pub use ensemble::{
    Ensemble, EnsembleConfig, EnsembleOptimizer, Member, MODEL_LOG_STD_MAX, MODEL_LOG_STD_MIN, STATE_CLIP,
};
pub use normalizer::{Normalizer, Standardizer, STD_FLOOR};

use ndarray::{Array2, ArrayView2};

use crate::envs::Env;
use crate::error::{ensure_len, Result};
use crate::SimRng;

/// Anything that maps batches of `(s, a)` rows to next states.
pub trait DynamicsModel: Send + Sync {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn predict_batch(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>, rng: &mut SimRng) -> Result<Array2<f64>>;
}

/// The true simulator exposed as a dynamics model.
pub struct OracleModel<'a> {
    env: &'a dyn Env,
}

impl<'a> OracleModel<'a> {
    pub fn new(env: &'a dyn Env) -> Self {
        OracleModel { env }
    }
}

impl DynamicsModel for OracleModel<'_> {
    fn obs_dim(&self) -> usize {
        self.env.spec().obs_dim
    }

    fn act_dim(&self) -> usize {
        self.env.spec().act_dim
    }

    fn predict_batch(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>, _rng: &mut SimRng) -> Result<Array2<f64>> {
        ensure_len("state width", states.ncols(), self.obs_dim())?;
        ensure_len("action width", actions.ncols(), self.act_dim())?;
        ensure_len("action rows", actions.nrows(), states.nrows())?;
        let mut out = Array2::zeros(states.raw_dim());
        for i in 0..states.nrows() {
            let a = self.env.spec().clip_action(&actions.row(i).to_vec());
            let next = self.env.dynamics(&states.row(i).to_vec(), &a);
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&next));
        }
        Ok(out)
    }
}
