use parking_lot::Mutex;

/// Ordered by tie-break priority in the virtual scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WorkerKind {
    Data,
    Model,
    Policy,
}

impl WorkerKind {
    pub fn name(self) -> &'static str {
        match self {
            WorkerKind::Data => "data",
            WorkerKind::Model => "model",
            WorkerKind::Policy => "policy",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

/// One trace line: `virtual_time,worker,op,version`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub worker: WorkerKind,
    pub op: &'static str,
    pub version: u64,
}

impl TraceEvent {
    pub fn to_line(&self) -> String {
        format!("{},{},{},{}", self.time, self.worker.name(), self.op, self.version)
    }
}

/// One evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub wall_clock_s: f64,
    pub virtual_time_s: f64,
    pub real_env_steps: u64,
    pub trajectories: u64,
    pub avg_eval_return: f64,
    pub std_eval_return: f64,
    /// NaN until the model learner reports a validation loss.
    pub model_val_loss: f64,
    pub model_version: u64,
    pub policy_version: u64,
    pub imagined_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub trajectories: u64,
    pub real_env_steps: u64,
    pub imagined_steps: u64,
    pub policy_steps: u64,
    pub model_epochs: u64,
    pub model_pushes: u64,
    pub policy_pushes: u64,
    pub final_eval_return: f64,
    pub wall_clock_s: f64,
    pub virtual_time_s: f64,
    /// Busy seconds per worker (data, model, policy) on the run's clock.
    pub busy_s: [f64; 3],
    pub incidents: Vec<String>,
    /// Policy version used by each collected rollout, in push order.
    pub rollout_policy_versions: Vec<u64>,
    /// Initial-state seed of each collected rollout, in push order.
    pub rollout_env_seeds: Vec<u64>,
    /// Model version used by each policy gradient step.
    pub step_model_versions: Vec<u64>,
    /// Model validation loss after each epoch.
    pub val_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
    pub events: Vec<TraceEvent>,
    pub summary: RunSummary,
}

impl RunMetrics {
    pub fn trace_text(&self) -> String {
        let mut out = String::from("virtual_time,worker,op,version\n");
        for e in &self.events {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Default)]
struct Inner {
    events: Vec<TraceEvent>,
    rows: Vec<MetricsRow>,
    summary: RunSummary,
    last_val_loss: Option<f64>,
}

/// Instrumentation sink; workers write to it but never read each other's
/// entries.
#[derive(Debug, Default)]
pub struct Telemetry {
    inner: Mutex<Inner>,
}

impl Telemetry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn event(&self, time: f64, worker: WorkerKind, op: &'static str, version: u64) {
        self.inner.lock().events.push(TraceEvent { time, worker, op, version });
    }

    pub fn busy(&self, worker: WorkerKind, seconds: f64) {
        self.inner.lock().summary.busy_s[worker.index()] += seconds;
    }

    pub fn incident(&self, message: String) {
        log::warn!("{message}");
        self.inner.lock().summary.incidents.push(message);
    }

    pub(crate) fn rollout_pushed(&self, steps: u64, policy_version: u64, env_seed: u64) {
        let mut g = self.inner.lock();
        g.summary.rollout_env_seeds.push(env_seed);
        g.summary.real_env_steps += steps;
        g.summary.trajectories += 1;
        g.summary.rollout_policy_versions.push(policy_version);
    }

    pub(crate) fn epoch_done(&self, val_loss: Option<f64>) {
        let mut g = self.inner.lock();
        g.summary.model_epochs += 1;
        if let Some(v) = val_loss {
            g.summary.val_losses.push(v);
            g.last_val_loss = Some(v);
        }
    }

    pub(crate) fn policy_step(&self, imagined: u64, model_version: u64) {
        let mut g = self.inner.lock();
        g.summary.policy_steps += 1;
        g.summary.imagined_steps += imagined;
        g.summary.step_model_versions.push(model_version);
    }

    pub(crate) fn counts(&self) -> (u64, u64, f64) {
        let g = self.inner.lock();
        (
            g.summary.real_env_steps,
            g.summary.imagined_steps,
            g.last_val_loss.unwrap_or(f64::NAN),
        )
    }

    pub(crate) fn row(&self, row: MetricsRow) {
        self.inner.lock().rows.push(row);
    }

    pub fn into_metrics(self) -> RunMetrics {
        let inner = self.inner.into_inner();
        let mut summary = inner.summary;
        summary.final_eval_return = inner.rows.last().map(|r| r.avg_eval_return).unwrap_or(f64::NAN);
        RunMetrics {
            rows: inner.rows,
            events: inner.events,
            summary,
        }
    }
}
