use std::path::{Path, PathBuf};

use super::config::{render_config, ExperimentConfig};
use super::csvlog::{aggregate, format_aggregate_csv, write_run_csv, Axis, RunLog};
use crate::error::Result;
use crate::workers::{run, RunConfig, RunMetrics};

/// Metadata written at the top of a run's CSV.
pub fn run_metadata(cfg: &RunConfig) -> Vec<(String, String)> {
    vec![
        ("env".into(), cfg.env.clone()),
        ("mode".into(), cfg.mode.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("max_trajectories".into(), cfg.stop.max_trajectories.to_string()),
        ("horizon".into(), cfg.horizon.to_string()),
        ("speed_multiplier".into(), cfg.speed_multiplier.to_string()),
    ]
}

pub fn run_log(cfg: &RunConfig, metrics: &RunMetrics) -> RunLog {
    RunLog {
        meta: run_metadata(cfg),
        rows: metrics.rows.clone(),
    }
}

fn stem(cfg: &RunConfig) -> String {
    format!("{}_{}", cfg.env, cfg.mode)
}

pub fn run_csv_path(out_dir: &Path, cfg: &RunConfig) -> PathBuf {
    out_dir.join(format!("{}_seed{}.csv", stem(cfg), cfg.seed))
}

pub fn trace_path(out_dir: &Path, cfg: &RunConfig) -> PathBuf {
    out_dir.join(format!("{}_seed{}_trace.csv", stem(cfg), cfg.seed))
}

pub fn aggregate_path(out_dir: &Path, cfg: &RunConfig) -> PathBuf {
    out_dir.join(format!("{}_aggregate.csv", stem(cfg)))
}

#[derive(Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub result: std::result::Result<RunMetrics, String>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub outcomes: Vec<SeedOutcome>,
    pub csv_paths: Vec<PathBuf>,
    pub aggregate_path: Option<PathBuf>,
}

impl ExperimentReport {
    pub fn succeeded(&self) -> impl Iterator<Item = (u64, &RunMetrics)> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok().map(|m| (o.seed, m)))
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }

    /// 0 when every seed succeeded, 1 when any failed.
    pub fn exit_code(&self) -> i32 {
        if self.failures() == 0 {
            0
        } else {
            1
        }
    }
}

/// Runs every seed sequentially, writing per-seed CSVs and traces, the
/// rendered config and an aggregate over the successful seeds into
/// `out_dir`. A failed seed is recorded in the report, not returned as an
/// error; only I/O failures abort.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(format!("{}_config.txt", stem(&cfg.run))), render_config(cfg))?;
    let mut outcomes = Vec::new();
    let mut csv_paths = Vec::new();
    let mut logs = Vec::new();
    for plan in cfg.plans() {
        log::info!("running {} {} seed {}", plan.env, plan.mode, plan.seed);
        let result = run(&plan);
        match result {
            Ok(metrics) => {
                let path = run_csv_path(out_dir, &plan);
                let rl = run_log(&plan, &metrics);
                write_run_csv(&path, &rl)?;
                std::fs::write(trace_path(out_dir, &plan), metrics.trace_text())?;
                csv_paths.push(path);
                logs.push(rl);
                outcomes.push(SeedOutcome {
                    seed: plan.seed,
                    result: Ok(metrics),
                });
            }
            Err(e) => {
                log::error!("seed {} failed: {e}", plan.seed);
                outcomes.push(SeedOutcome {
                    seed: plan.seed,
                    result: Err(e.to_string()),
                });
            }
        }
    }
    let aggregate_path = if logs.is_empty() {
        None
    } else {
        let blocks = [Axis::WallClock, Axis::Samples]
            .into_iter()
            .map(|a| aggregate(&logs, a).map(|p| (a, p)))
            .collect::<Result<Vec<_>>>()?;
        let mut meta = run_metadata(&cfg.run);
        meta.retain(|(k, _)| k != "seed");
        meta.push((
            "seeds".into(),
            logs.iter().filter_map(|l| l.meta_value("seed")).collect::<Vec<_>>().join(" "),
        ));
        let path = aggregate_path(out_dir, &cfg.run);
        std::fs::write(&path, format_aggregate_csv(&meta, &blocks)?)?;
        Some(path)
    };
    Ok(ExperimentReport {
        outcomes,
        csv_paths,
        aggregate_path,
    })
}
