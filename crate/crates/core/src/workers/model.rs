use std::collections::VecDeque;

use super::config::streams;
use super::{derive_seed, Begin, Ctx, ModelConfig, Worker, WorkerKind};
use crate::coord::ParamBlob;
use crate::dynamics::{DatasetBuffer, Ensemble, EnsembleOptimizer, Split, ValidationTracker};
use crate::error::{Error, Result};
use crate::SimRng;

/// Drains new trajectories into its local FIFO, trains one epoch per
/// operation, and publishes the ensemble after every epoch. Early stopping
/// idles the worker until new data arrives.
pub struct ModelWorker {
    ensemble: Ensemble,
    last_pushed: Ensemble,
    opt: EnsembleOptimizer,
    buffer: DatasetBuffer,
    tracker: Option<ValidationTracker>,
    early_stopped: bool,
    rng: SimRng,
    cfg: ModelConfig,
    epoch_duration: f64,
    pending: Option<ParamBlob>,
    respect_stop: bool,
    loss_script: Option<VecDeque<f64>>,
}

impl ModelWorker {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: &ModelConfig, run_seed: u64, epoch_duration: f64) -> Result<Self> {
        let mut rng = crate::envs::seeded_rng(derive_seed(run_seed, streams::MODEL, 0));
        let ensemble = Ensemble::new(obs_dim, act_dim, &cfg.ensemble, &mut rng)?;
        Ok(ModelWorker {
            opt: EnsembleOptimizer::from_config(&ensemble, &cfg.ensemble),
            last_pushed: ensemble.clone(),
            ensemble,
            buffer: DatasetBuffer::new(obs_dim, act_dim, cfg.capacity, cfg.validation_fraction)?,
            tracker: cfg.beta_ema.map(ValidationTracker::new),
            early_stopped: false,
            rng,
            cfg: cfg.clone(),
            epoch_duration,
            pending: None,
            respect_stop: true,
            loss_script: None,
        })
    }

    /// Keep working after the stop criterion; the phase drivers decide when
    /// to stop.
    pub fn ignoring_stop(mut self) -> Self {
        self.respect_stop = false;
        self
    }

    /// Replaces the measured validation losses with a scripted sequence.
    pub fn with_loss_script(mut self, losses: impl IntoIterator<Item = f64>) -> Self {
        self.loss_script = Some(losses.into_iter().collect());
        self
    }

    pub fn is_early_stopped(&self) -> bool {
        self.early_stopped
    }

    pub fn buffer(&self) -> &DatasetBuffer {
        &self.buffer
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    /// Moves pending trajectories into the local dataset; returns how many.
    pub fn ingest(&mut self, ctx: &Ctx) -> Result<usize> {
        let fresh = ctx.servers.data.drain();
        if fresh.is_empty() {
            return Ok(0);
        }
        for t in &fresh {
            self.buffer.append(t)?;
        }
        self.ensemble.fit_normalizer(&self.buffer)?;
        if let Some(t) = self.tracker.as_mut() {
            t.reset();
        }
        self.early_stopped = false;
        ctx.telemetry.event(ctx.clock.now(), WorkerKind::Model, "drain", fresh.len() as u64);
        Ok(fresh.len())
    }

    fn validation(&mut self) -> Result<Option<f64>> {
        if let Some(script) = self.loss_script.as_mut() {
            return Ok(script.pop_front());
        }
        if self.buffer.count(Split::Validation) == 0 {
            return Ok(None);
        }
        self.ensemble.validation_loss(&self.buffer).map(Some)
    }
}

impl Worker for ModelWorker {
    fn kind(&self) -> WorkerKind {
        WorkerKind::Model
    }

    fn nominal_duration(&self) -> f64 {
        self.epoch_duration
    }

    fn begin(&mut self, ctx: &Ctx) -> Result<Begin> {
        if self.respect_stop && ctx.servers.stop_reached() {
            return Ok(Begin::Done);
        }
        self.ingest(ctx)?;
        if self.early_stopped || self.buffer.count(Split::Train) == 0 {
            return Ok(Begin::Idle);
        }
        let trained = self
            .ensemble
            .train_epoch(&self.buffer, &mut self.opt, &mut self.rng)
            .and_then(|_| self.validation());
        let val = match trained {
            Ok(v) => v,
            Err(Error::Numeric(msg)) => {
                ctx.telemetry.incident(format!("model epoch discarded: {msg}"));
                self.ensemble = self.last_pushed.clone();
                self.opt = EnsembleOptimizer::from_config(&self.ensemble, &self.cfg.ensemble);
                self.pending = None;
                return Ok(Begin::Work(self.epoch_duration));
            }
            Err(e) => return Err(e),
        };
        ctx.telemetry.epoch_done(val);
        ctx.telemetry.event(ctx.clock.now(), WorkerKind::Model, "epoch", 0);
        if let (Some(t), Some(v)) = (self.tracker.as_mut(), val) {
            if t.should_stop(v) {
                self.early_stopped = true;
                ctx.telemetry.event(ctx.clock.now(), WorkerKind::Model, "early_stop", 0);
            }
        }
        self.pending = Some(ParamBlob::from_vectors(&self.ensemble.to_vectors()));
        Ok(Begin::Work(self.epoch_duration))
    }

    fn finish(&mut self, ctx: &Ctx) -> Result<()> {
        if let Some(blob) = self.pending.take() {
            let v = ctx.servers.model.push(blob)?;
            self.last_pushed = self.ensemble.clone();
            ctx.telemetry.event(ctx.clock.now(), WorkerKind::Model, "push_model", v.0);
        }
        Ok(())
    }
}
