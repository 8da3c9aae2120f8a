use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::workers::{RunConfig, RunMode};

/// A run template plus the seeds to execute it with.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            run: RunConfig::default(),
            seeds: vec![0],
        }
    }
}

impl ExperimentConfig {
    /// One run per seed, in seed-list order.
    pub fn plans(&self) -> Vec<RunConfig> {
        self.seeds
            .iter()
            .map(|&seed| RunConfig {
                seed,
                ..self.run.clone()
            })
            .collect()
    }

    /// Applies `section.key=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment.split_once('=').ok_or_else(|| Error::Config {
            line: 0,
            key: assignment.to_string(),
            message: "expected section.key=value".into(),
        })?;
        let path = path.trim();
        let (section, key) = path.split_once('.').unwrap_or(("run", path));
        set_key(self, section, key, value.trim()).map_err(|message| Error::Config {
            line: 0,
            key: format!("{section}.{key}"),
            message,
        })?;
        self.validate(0)
    }

    fn validate(&self, line: usize) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config {
                line,
                key: "run.seeds".into(),
                message: "at least one seed is required".into(),
            });
        }
        self.run.validate().map_err(|e| Error::Config {
            line,
            key: "config".into(),
            message: e.to_string(),
        })
    }
}

type Setter = fn(&mut ExperimentConfig, &str) -> std::result::Result<(), String>;

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse '{v}': {e}"))
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|s| num(s.trim())).collect()
}

fn bool_value(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true or false, got '{other}'")),
    }
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Every accepted key with its parser and renderer, in render order.
fn table() -> Vec<(&'static str, &'static str, Setter, fn(&ExperimentConfig) -> String)> {
    vec![
        ("run", "env", |c, v| {
            c.run.env = v.to_string();
            Ok(())
        }, |c| c.run.env.clone()),
        ("run", "mode", |c, v| {
            c.run.mode = v.parse::<RunMode>()?;
            Ok(())
        }, |c| c.run.mode.to_string()),
        ("run", "max_trajectories", |c, v| {
            c.run.stop.max_trajectories = num(v)?;
            Ok(())
        }, |c| c.run.stop.max_trajectories.to_string()),
        ("run", "seeds", |c, v| {
            c.seeds = list(v)?;
            Ok(())
        }, |c| join(&c.seeds)),
        ("run", "horizon", |c, v| {
            c.run.horizon = num(v)?;
            Ok(())
        }, |c| c.run.horizon.to_string()),
        ("run", "dt", |c, v| {
            c.run.dt = if v == "default" { None } else { Some(num(v)?) };
            Ok(())
        }, |c| c.run.dt.map_or("default".into(), |d| d.to_string())),
        ("run", "speed_multiplier", |c, v| {
            c.run.speed_multiplier = num(v)?;
            Ok(())
        }, |c| c.run.speed_multiplier.to_string()),
        ("run", "eval_every", |c, v| {
            c.run.eval_every = num(v)?;
            Ok(())
        }, |c| c.run.eval_every.to_string()),
        ("run", "eval_episodes", |c, v| {
            c.run.eval_episodes = num(v)?;
            Ok(())
        }, |c| c.run.eval_episodes.to_string()),
        ("run", "init_state_window", |c, v| {
            c.run.init_state_window = num(v)?;
            Ok(())
        }, |c| c.run.init_state_window.to_string()),
        ("train", "gamma", |c, v| {
            c.run.train.gamma = num(v)?;
            Ok(())
        }, |c| c.run.train.gamma.to_string()),
        ("train", "gae_lambda", |c, v| {
            c.run.train.gae_lambda = num(v)?;
            Ok(())
        }, |c| c.run.train.gae_lambda.to_string()),
        ("train", "clip_eps", |c, v| {
            c.run.train.clip_eps = num(v)?;
            Ok(())
        }, |c| c.run.train.clip_eps.to_string()),
        ("train", "imagined_horizon", |c, v| {
            c.run.train.imagined_horizon = num(v)?;
            Ok(())
        }, |c| c.run.train.imagined_horizon.to_string()),
        ("train", "imagined_batch_paths", |c, v| {
            c.run.train.imagined_batch_paths = num(v)?;
            Ok(())
        }, |c| c.run.train.imagined_batch_paths.to_string()),
        ("train", "policy_lr", |c, v| {
            c.run.train.policy_lr = num(v)?;
            Ok(())
        }, |c| c.run.train.policy_lr.to_string()),
        ("train", "value_lr", |c, v| {
            c.run.train.value_lr = num(v)?;
            Ok(())
        }, |c| c.run.train.value_lr.to_string()),
        ("train", "entropy_coef", |c, v| {
            c.run.train.entropy_coef = num(v)?;
            Ok(())
        }, |c| c.run.train.entropy_coef.to_string()),
        ("train", "policy_hidden", |c, v| {
            c.run.train.policy_hidden = list(v)?;
            Ok(())
        }, |c| join(&c.run.train.policy_hidden)),
        ("train", "value_hidden", |c, v| {
            c.run.train.value_hidden = list(v)?;
            Ok(())
        }, |c| join(&c.run.train.value_hidden)),
        ("train", "activation", |c, v| {
            c.run.train.activation = v.parse::<Activation>()?;
            Ok(())
        }, |c| c.run.train.activation.name().into()),
        ("train", "init_log_std", |c, v| {
            c.run.train.init_log_std = num(v)?;
            Ok(())
        }, |c| c.run.train.init_log_std.to_string()),
        ("model", "k", |c, v| {
            c.run.model.ensemble.k = num(v)?;
            Ok(())
        }, |c| c.run.model.ensemble.k.to_string()),
        ("model", "hidden", |c, v| {
            c.run.model.ensemble.hidden = list(v)?;
            Ok(())
        }, |c| join(&c.run.model.ensemble.hidden)),
        ("model", "activation", |c, v| {
            c.run.model.ensemble.activation = v.parse::<Activation>()?;
            Ok(())
        }, |c| c.run.model.ensemble.activation.name().into()),
        ("model", "lr", |c, v| {
            c.run.model.ensemble.lr = num(v)?;
            Ok(())
        }, |c| c.run.model.ensemble.lr.to_string()),
        ("model", "batch_size", |c, v| {
            c.run.model.ensemble.batch_size = num(v)?;
            Ok(())
        }, |c| c.run.model.ensemble.batch_size.to_string()),
        ("model", "stochastic", |c, v| {
            c.run.model.ensemble.stochastic = bool_value(v)?;
            Ok(())
        }, |c| c.run.model.ensemble.stochastic.to_string()),
        ("model", "beta_ema", |c, v| {
            c.run.model.beta_ema = if v == "off" { None } else { Some(num(v)?) };
            Ok(())
        }, |c| c.run.model.beta_ema.map_or("off".into(), |b| b.to_string())),
        ("model", "capacity", |c, v| {
            c.run.model.capacity = num(v)?;
            Ok(())
        }, |c| c.run.model.capacity.to_string()),
        ("model", "validation_fraction", |c, v| {
            c.run.model.validation_fraction = num(v)?;
            Ok(())
        }, |c| c.run.model.validation_fraction.to_string()),
        ("model", "max_epochs_per_iteration", |c, v| {
            c.run.model.max_epochs_per_iteration = num(v)?;
            Ok(())
        }, |c| c.run.model.max_epochs_per_iteration.to_string()),
        ("ablation", "n", |c, v| {
            c.run.ablation.n = num(v)?;
            Ok(())
        }, |c| c.run.ablation.n.to_string()),
        ("ablation", "e", |c, v| {
            c.run.ablation.e = num(v)?;
            Ok(())
        }, |c| c.run.ablation.e.to_string()),
        ("ablation", "g", |c, v| {
            c.run.ablation.g = num(v)?;
            Ok(())
        }, |c| c.run.ablation.g.to_string()),
        ("cost", "epoch_duration", |c, v| {
            c.run.cost.epoch_duration = num(v)?;
            Ok(())
        }, |c| c.run.cost.epoch_duration.to_string()),
        ("cost", "grad_step_duration", |c, v| {
            c.run.cost.grad_step_duration = num(v)?;
            Ok(())
        }, |c| c.run.cost.grad_step_duration.to_string()),
    ]
}

const SECTIONS: [&str; 5] = ["run", "train", "model", "ablation", "cost"];

fn set_key(cfg: &mut ExperimentConfig, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
    if !SECTIONS.contains(&section) {
        return Err(format!("unknown section '{section}', expected one of {}", SECTIONS.join(", ")));
    }
    let entries = table();
    let Some((_, _, set, _)) = entries.iter().find(|(s, k, _, _)| *s == section && *k == key) else {
        let known: Vec<&str> = entries.iter().filter(|(s, ..)| *s == section).map(|(_, k, ..)| *k).collect();
        return Err(format!("unknown key in [{section}], expected one of {}", known.join(", ")));
    };
    set(cfg, value)
}

/// Parses `key = value` lines grouped under `[section]` headers. Keys before
/// the first header belong to `[run]`; `#` starts a comment. Unset keys keep
/// their defaults; the result is validated.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut section = "run".to_string();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                line: line_no,
                key: line.to_string(),
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config {
                    line: line_no,
                    key: name.to_string(),
                    message: format!("unknown section, expected one of {}", SECTIONS.join(", ")),
                });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            key: line.to_string(),
            message: "expected key = value".into(),
        })?;
        let key = key.trim();
        let full = format!("{section}.{key}");
        if !seen.insert(full.clone()) {
            return Err(Error::Config {
                line: line_no,
                key: full,
                message: "duplicate key".into(),
            });
        }
        set_key(&mut cfg, &section, key, value.trim()).map_err(|message| Error::Config {
            line: line_no,
            key: full,
            message,
        })?;
    }
    cfg.validate(0)?;
    Ok(cfg)
}

/// Every key, grouped by section; `parse_config` reads it back unchanged.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut current = "";
    for (section, key, _, get) in table() {
        if section != current {
            if !current.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{section}]");
            current = section;
        }
        let _ = writeln!(out, "{key} = {}", get(cfg));
    }
    out
}
